#pragma once

// SGD on the hinge loss with L2 weight decay on filter and readout weights
// (biases are not decayed). Training runs until a fixed multiple of the
// interpolation epoch -- the first epoch with zero training error -- capped
// by max_epochs. Bulk training uses single precision; instantiate with
// double for exact-arithmetic checks.

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "scalelab/common.hpp"
#include "scalelab/data.hpp"
#include "scalelab/net.hpp"
#include "scalelab/rng.hpp"

namespace scalelab::net {

struct TrainConfig {
    double learning_rate = 0.01;
    int batch_size = 8;
    double weight_decay = 0.01;
    long max_epochs = 100000;
    double stop_factor = 500; // stop at stop_factor * interpolation epoch
    std::uint64_t seed = 0;
};

struct FilterSnapshot {
    struct LayerFilters {
        int out_channels = 0;
        int in_channels = 0;
        int filter_size = 0;
        std::vector<double> weights; // [out][in][tap]
    };
    long epoch = 0;
    std::vector<LayerFilters> layers;
};

struct TrainLog {
    std::vector<double> epoch_loss;        // running mean hinge (data term)
    std::vector<double> epoch_train_error; // running classification error
    std::vector<std::pair<long, double>> test_error_points;
    long interpolation_epoch = -1;
    long epochs_run = 0;
    double final_train_error = 1;
    double final_test_error = 1;
    std::vector<FilterSnapshot> snapshots; // epochs 0, 1, 2, 4, ... and final
};

struct TrainResult {
    Network network;
    TrainLog log;
};

namespace detail {

inline void validate_train_config(const TrainConfig& cfg) {
    if (cfg.learning_rate < 0) throw parameter_error("train: learning rate must be >= 0");
    if (cfg.batch_size < 1) throw parameter_error("train: batch size must be positive");
    if (cfg.weight_decay < 0) throw parameter_error("train: weight decay must be >= 0");
    if (cfg.max_epochs < 1) throw parameter_error("train: max epochs must be positive");
    if (cfg.stop_factor <= 0) throw parameter_error("train: stop factor must be positive");
}

template <class T>
FilterSnapshot take_snapshot(const ConvEngine<T>& engine, Network& scratch, long epoch) {
    engine.store_weights(scratch);
    FilterSnapshot snap;
    snap.epoch = epoch;
    for (const auto& l : scratch.layers)
        snap.layers.push_back({l.out_channels, l.in_channels, l.filter_size, l.weights});
    return snap;
}

// Classification error rate over an index set.
template <class T>
double error_rate(ConvEngine<T>& engine, const data::Dataset& ds, const std::vector<int>& idx,
                  int batch) {
    if (idx.empty()) return 0.0;
    long wrong = 0;
    std::vector<const double*> xs;
    for (std::size_t pos = 0; pos < idx.size();) {
        xs.clear();
        const std::size_t stop = std::min(idx.size(), pos + batch);
        for (std::size_t q = pos; q < stop; ++q) xs.push_back(ds.examples[idx[q]].input.pixels.data());
        engine.forward(xs);
        for (std::size_t q = pos; q < stop; ++q) {
            const double out = static_cast<double>(engine.output(static_cast<int>(q - pos)));
            if (ds.examples[idx[q]].label * out <= 0) ++wrong;
        }
        pos = stop;
    }
    return static_cast<double>(wrong) / static_cast<double>(idx.size());
}

} // namespace detail

template <class T = float>
TrainResult train(const Network& net, const data::Dataset& ds, const TrainConfig& cfg) {
    detail::validate_train_config(cfg);
    if (!net.has_readout) throw parameter_error("train: network has no readout");
    if (ds.train_indices.empty()) throw parameter_error("train: dataset has no training split");
    for (int i : ds.train_indices) {
        const auto& ex = ds.examples[i];
        if (ex.label != 1 && ex.label != -1) throw parameter_error("train: labels must be +1 or -1");
        if (static_cast<int>(ex.input.pixels.size()) != net.input_length)
            throw parameter_error("train: example size does not match the network");
    }

    TrainResult result{net, {}};
    TrainLog& log = result.log;
    detail::ConvEngine<T> engine(net, cfg.batch_size);
    auto order_rng = rng::make_engine(rng::derive(cfg.seed, "order"));

    std::vector<int> order = ds.train_indices;
    const int n_train = static_cast<int>(order.size());
    std::vector<const double*> xs;
    std::vector<T> dout;

    auto is_snapshot_epoch = [](long e) { return e == 0 || (e & (e - 1)) == 0; };
    log.snapshots.push_back(detail::take_snapshot(engine, result.network, 0));
    log.test_error_points.push_back({0, detail::error_rate(engine, ds, ds.test_indices, cfg.batch_size)});

    long stop_epoch = cfg.max_epochs;
    for (long epoch = 1; epoch <= stop_epoch; ++epoch) {
        std::shuffle(order.begin(), order.end(), order_rng);
        double loss_sum = 0;
        long wrong = 0;
        for (int pos = 0; pos < n_train;) {
            const int bsz = std::min(cfg.batch_size, n_train - pos);
            xs.clear();
            for (int q = 0; q < bsz; ++q) xs.push_back(ds.examples[order[pos + q]].input.pixels.data());
            engine.forward(xs);
            dout.assign(bsz, T(0));
            for (int q = 0; q < bsz; ++q) {
                const int y = ds.examples[order[pos + q]].label;
                const double out = static_cast<double>(engine.output(q));
                const double margin = 1.0 - y * out;
                if (margin > 0) {
                    loss_sum += margin;
                    dout[q] = static_cast<T>(-static_cast<double>(y) / bsz);
                }
                if (y * out <= 0) ++wrong;
            }
            engine.zero_gradients();
            engine.backward(dout);
            engine.sgd_step(static_cast<T>(cfg.learning_rate), static_cast<T>(cfg.weight_decay));
            pos += bsz;
        }
        const double mean_loss = loss_sum / n_train;
        if (!std::isfinite(mean_loss)) throw training_divergence("train: non-finite loss");
        log.epoch_loss.push_back(mean_loss);
        log.epoch_train_error.push_back(static_cast<double>(wrong) / n_train);
        log.epochs_run = epoch;

        if (log.interpolation_epoch < 0 && wrong == 0) {
            // running error uses pre-update outputs; confirm on final weights
            if (detail::error_rate(engine, ds, ds.train_indices, cfg.batch_size) == 0.0) {
                log.interpolation_epoch = epoch;
                const double target = cfg.stop_factor * static_cast<double>(epoch);
                stop_epoch = std::min<long>(cfg.max_epochs,
                                            static_cast<long>(std::llround(target)));
            }
        }
        if (is_snapshot_epoch(epoch) || epoch == stop_epoch) {
            log.snapshots.push_back(detail::take_snapshot(engine, result.network, epoch));
            log.test_error_points.push_back(
                {epoch, detail::error_rate(engine, ds, ds.test_indices, cfg.batch_size)});
        }
    }

    engine.store_weights(result.network);
    log.final_train_error = detail::error_rate(engine, ds, ds.train_indices, cfg.batch_size);
    log.final_test_error = detail::error_rate(engine, ds, ds.test_indices, cfg.batch_size);
    if (log.snapshots.back().epoch != log.epochs_run)
        log.snapshots.push_back(detail::take_snapshot(engine, result.network, log.epochs_run));
    if (log.test_error_points.back().first != log.epochs_run)
        log.test_error_points.push_back({log.epochs_run, log.final_test_error});
    return result;
}

// Mean hinge loss plus the decay penalty (wd/2)|w|^2 on a fixed batch, with
// parameter gradients left in `grads` (a same-architecture network whose
// weight fields hold d(loss)/d(param)). Double precision path for gradient
// verification.
inline double hinge_loss_and_gradients(const Network& net,
                                       const std::vector<const double*>& xs,
                                       const std::vector<int>& ys, double weight_decay,
                                       Network& grads) {
    detail::ConvEngine<double> engine(net, static_cast<int>(xs.size()));
    engine.forward(xs);
    const int B = static_cast<int>(xs.size());
    double loss = 0;
    std::vector<double> dout(B, 0.0);
    for (int b = 0; b < B; ++b) {
        const double margin = 1.0 - ys[b] * engine.output(b);
        if (margin > 0) {
            loss += margin;
            dout[b] = -static_cast<double>(ys[b]) / B;
        }
    }
    loss /= B;
    loss += weight_decay * engine.weight_norm_half();
    engine.zero_gradients();
    engine.backward(dout);
    grads = net;
    engine.store_gradients(grads);
    // add the decay term so grads match the reported loss
    for (std::size_t k = 0; k < grads.layers.size(); ++k)
        for (std::size_t i = 0; i < grads.layers[k].weights.size(); ++i)
            grads.layers[k].weights[i] += weight_decay * net.layers[k].weights[i];
    for (std::size_t i = 0; i < grads.readout_weights.size(); ++i)
        grads.readout_weights[i] += weight_decay * net.readout_weights[i];
    return loss;
}

} // namespace scalelab::net
