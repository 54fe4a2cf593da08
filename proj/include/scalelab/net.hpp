#pragma once

// Minimal 1D convolutional network: stacked identical conv layers with ReLU,
// circular boundary, stride 1 or F, and a linear readout on the flattened
// final representation. Supports an analytic homogeneous mode (all filter
// taps 1/F, no biases, no readout) in which a layer acts as the stochastic
// averaging step of theory::circulant_power.
//
// Patch anchoring. Stride-1 patches are centered on the output position;
// even filter sizes take F/2 taps left of center and F/2 - 1 right. Stride-F
// patches tile the signal in non-overlapping blocks starting at F*a, so the
// receptive field of position a after k layers is exactly the k-th level
// block partition.

#include <algorithm>
#include <cblas.h>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "scalelab/common.hpp"
#include "scalelab/data.hpp"
#include "scalelab/ioutil.hpp"
#include "scalelab/rng.hpp"

namespace scalelab::net {

struct ConvLayer {
    int in_channels = 1;
    int out_channels = 1;
    int filter_size = 3;
    int stride = 1; // 1 or filter_size
    std::vector<double> weights; // [out][in][tap]
    std::vector<double> biases;  // [out]

    int tap_origin() const { return stride == 1 ? -(filter_size / 2) : 0; }

    double& w(int co, int ci, int t) {
        return weights[(static_cast<std::size_t>(co) * in_channels + ci) * filter_size + t];
    }
    double w(int co, int ci, int t) const {
        return weights[(static_cast<std::size_t>(co) * in_channels + ci) * filter_size + t];
    }
};

struct Network {
    int input_length = 0;
    std::vector<ConvLayer> layers;
    bool has_readout = true;
    std::vector<double> readout_weights; // channel-major: [c][position]
    double readout_bias = 0;
    std::uint64_t init_seed = 0;

    int depth() const { return static_cast<int>(layers.size()); }

    // Spatial length of the level-k representation (k = 0 is the input).
    int level_length(int k) const {
        int L = input_length;
        for (int l = 0; l < k; ++l) L /= layers[l].stride;
        return L;
    }
    int level_channels(int k) const { return k == 0 ? 1 : layers[k - 1].out_channels; }

    std::size_t filter_parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weights.size();
        return n;
    }
};

// Per-level post-activation representations f_0 .. f_K plus the readout.
struct LayerTaps {
    std::vector<std::vector<double>> reps; // channel-major: rep[k][c * L_k + a]
    std::vector<int> lengths;
    std::vector<int> channels;
    double output = 0;
    bool has_output = false;
};

namespace detail {

inline void validate_architecture(int depth, int channels, int F, int stride, int L, int dim) {
    if (dim != 1)
        throw parameter_error("build_network: only 1D networks are supported (dim must be 1)");
    if (depth < 0) throw parameter_error("build_network: depth must be >= 0");
    if (channels < 1) throw parameter_error("build_network: channels must be >= 1");
    if (F < 2) throw parameter_error("build_network: filter size must be >= 2");
    if (stride != 1 && stride != F)
        throw parameter_error("build_network: stride must be 1 or the filter size");
    if (L < F) throw parameter_error("build_network: input length must be at least F");
    if (stride == F) {
        long long span = 1;
        for (int k = 0; k < depth; ++k) span *= F;
        if (span == 0 || L % span != 0)
            throw parameter_error("build_network: stride-F networks require F^depth to divide L");
    }
}

} // namespace detail

// Weights iid Gaussian with variance 1/fan-in, biases zero.
inline Network build_network(int depth, int channels, int F, int stride, int L, int dim,
                             std::uint64_t seed) {
    detail::validate_architecture(depth, channels, F, stride, L, dim);
    Network net;
    net.input_length = L;
    net.init_seed = seed;
    int c_in = 1;
    for (int k = 0; k < depth; ++k) {
        ConvLayer layer;
        layer.in_channels = c_in;
        layer.out_channels = channels;
        layer.filter_size = F;
        layer.stride = stride;
        layer.weights.resize(static_cast<std::size_t>(channels) * c_in * F);
        layer.biases.assign(channels, 0.0);
        auto eng = rng::make_engine(rng::derive(seed, 1000 + static_cast<std::uint64_t>(k)));
        std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(F) * c_in));
        for (auto& w : layer.weights) w = gauss(eng);
        net.layers.push_back(std::move(layer));
        c_in = channels;
    }
    const int flat = net.level_length(depth) * net.level_channels(depth);
    net.readout_weights.resize(flat);
    auto eng = rng::make_engine(rng::derive(seed, "readout"));
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(flat)));
    for (auto& w : net.readout_weights) w = gauss(eng);
    net.readout_bias = 0;
    net.has_readout = true;
    return net;
}

// One-channel analytic network: every filter tap 1/F, no biases, no readout.
inline Network homogeneous_network(int depth, int F, int stride, int L) {
    detail::validate_architecture(depth, 1, F, stride, L, 1);
    Network net;
    net.input_length = L;
    for (int k = 0; k < depth; ++k) {
        ConvLayer layer;
        layer.in_channels = 1;
        layer.out_channels = 1;
        layer.filter_size = F;
        layer.stride = stride;
        layer.weights.assign(F, 1.0 / F);
        layer.biases.assign(1, 0.0);
        net.layers.push_back(std::move(layer));
    }
    net.has_readout = false;
    return net;
}

inline bool is_homogeneous(const Network& net) {
    for (const auto& l : net.layers) {
        if (l.in_channels != 1 || l.out_channels != 1) return false;
        for (double b : l.biases)
            if (b != 0) return false;
        for (double w : l.weights)
            if (w != 1.0 / l.filter_size) return false;
    }
    return true;
}

// Randomly permute the in-channel wiring of every layer independently;
// the filters themselves are unchanged.
inline Network shuffle_channels(const Network& net, std::uint64_t seed) {
    Network out = net;
    for (std::size_t k = 0; k < out.layers.size(); ++k) {
        auto& layer = out.layers[k];
        std::vector<int> perm(layer.in_channels);
        std::iota(perm.begin(), perm.end(), 0);
        auto eng = rng::make_engine(rng::derive(seed, 2000 + static_cast<std::uint64_t>(k)));
        std::shuffle(perm.begin(), perm.end(), eng);
        const auto& src = net.layers[k];
        for (int co = 0; co < layer.out_channels; ++co)
            for (int ci = 0; ci < layer.in_channels; ++ci)
                for (int t = 0; t < layer.filter_size; ++t)
                    layer.w(co, ci, t) = src.w(co, perm[ci], t);
    }
    return out;
}

// Collapse every layer to the average of its filters over (out, in) channel
// pairs and the average bias. The readout is summed across channels so the
// output is preserved when all channels are identical.
inline Network mean_channel(const Network& net) {
    Network out;
    out.input_length = net.input_length;
    out.init_seed = net.init_seed;
    for (const auto& src : net.layers) {
        ConvLayer layer;
        layer.in_channels = 1;
        layer.out_channels = 1;
        layer.filter_size = src.filter_size;
        layer.stride = src.stride;
        layer.weights.assign(src.filter_size, 0.0);
        for (int t = 0; t < src.filter_size; ++t) {
            double acc = 0;
            for (int co = 0; co < src.out_channels; ++co)
                for (int ci = 0; ci < src.in_channels; ++ci) acc += src.w(co, ci, t);
            layer.weights[t] = acc / (static_cast<double>(src.out_channels) * src.in_channels);
        }
        double bias = 0;
        for (double b : src.biases) bias += b;
        layer.biases.assign(1, bias / src.out_channels);
        out.layers.push_back(std::move(layer));
    }
    out.has_readout = net.has_readout;
    if (net.has_readout) {
        const int K = net.depth();
        const int L_K = net.level_length(K);
        const int C_K = net.level_channels(K);
        out.readout_weights.assign(L_K, 0.0);
        for (int c = 0; c < C_K; ++c)
            for (int a = 0; a < L_K; ++a)
                out.readout_weights[a] += net.readout_weights[static_cast<std::size_t>(c) * L_K + a];
        out.readout_bias = net.readout_bias;
    }
    return out;
}

// --- checkpoint -----------------------------------------------------------

inline void save_checkpoint(const Network& net, const std::filesystem::path& path) {
    nlohmann::json j;
    j["format"] = "scalelab-net-v1";
    j["input_length"] = net.input_length;
    j["seed"] = net.init_seed;
    auto& layers = j["layers"];
    layers = nlohmann::json::array();
    for (const auto& l : net.layers)
        layers.push_back(nlohmann::json{{"in", l.in_channels},
                                        {"out", l.out_channels},
                                        {"filter", l.filter_size},
                                        {"stride", l.stride},
                                        {"weights", l.weights},
                                        {"biases", l.biases}});
    if (net.has_readout)
        j["readout"] = nlohmann::json{{"weights", net.readout_weights}, {"bias", net.readout_bias}};
    else
        j["readout"] = nullptr;
    io::write_file(path, j.dump());
}

inline Network load_checkpoint(const std::filesystem::path& path) {
    nlohmann::json j = nlohmann::json::parse(io::read_file(path));
    if (j.value("format", "") != "scalelab-net-v1")
        throw io_error("unrecognized checkpoint format: " + path.string());
    Network net;
    net.input_length = j.at("input_length").get<int>();
    net.init_seed = j.value("seed", 0ull);
    for (const auto& lj : j.at("layers")) {
        ConvLayer l;
        l.in_channels = lj.at("in").get<int>();
        l.out_channels = lj.at("out").get<int>();
        l.filter_size = lj.at("filter").get<int>();
        l.stride = lj.at("stride").get<int>();
        l.weights = lj.at("weights").get<std::vector<double>>();
        l.biases = lj.at("biases").get<std::vector<double>>();
        if (l.weights.size() != static_cast<std::size_t>(l.out_channels) * l.in_channels * l.filter_size)
            throw io_error("checkpoint layer weight count mismatch");
        net.layers.push_back(std::move(l));
    }
    if (j.at("readout").is_null()) {
        net.has_readout = false;
    } else {
        net.has_readout = true;
        net.readout_weights = j.at("readout").at("weights").get<std::vector<double>>();
        net.readout_bias = j.at("readout").at("bias").get<double>();
    }
    return net;
}

// --- execution engine ------------------------------------------------------

namespace detail {

inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
                 int lda, const float* b, int ldb, float beta, float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
                 int lda, const double* b, int ldb, double beta, double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

// Shared forward/backward engine. Activations are stored channel-last,
// act[level][(b * L_k + a) * C_k + c]; filters are repacked per layer as
// a [C_out x (F * C_in)] matrix whose column index is t * C_in + c_in, the
// same order the im2col gather produces.
template <class T>
class ConvEngine {
public:
    ConvEngine(const Network& net, int max_batch) : max_batch_(max_batch) {
        const int K = net.depth();
        dims_.resize(K);
        gather_.resize(K);
        weights_.resize(K);
        biases_.resize(K);
        grad_w_.resize(K);
        grad_b_.resize(K);
        cols_.resize(K);
        grad_cols_.resize(K);
        acts_.resize(K + 1);
        grad_acts_.resize(K + 1);
        int L = net.input_length;
        for (int k = 0; k < K; ++k) {
            const auto& l = net.layers[k];
            Dims d;
            d.c_in = l.in_channels;
            d.c_out = l.out_channels;
            d.F = l.filter_size;
            d.L_in = L;
            d.L_out = L / l.stride;
            d.stride = l.stride;
            d.tap0 = l.tap_origin();
            dims_[k] = d;
            gather_[k].resize(static_cast<std::size_t>(d.L_out) * d.F);
            for (int a = 0; a < d.L_out; ++a)
                for (int t = 0; t < d.F; ++t) {
                    int p = (d.stride * a + d.tap0 + t) % d.L_in;
                    if (p < 0) p += d.L_in;
                    gather_[k][static_cast<std::size_t>(a) * d.F + t] = p;
                }
            weights_[k].resize(static_cast<std::size_t>(d.c_out) * d.F * d.c_in);
            biases_[k].resize(d.c_out);
            grad_w_[k].assign(weights_[k].size(), T(0));
            grad_b_[k].assign(d.c_out, T(0));
            cols_[k].resize(static_cast<std::size_t>(max_batch_) * d.L_out * d.F * d.c_in);
            grad_cols_[k].resize(cols_[k].size());
            acts_[k].resize(static_cast<std::size_t>(max_batch_) * d.L_in * d.c_in);
            grad_acts_[k].resize(acts_[k].size());
            L = d.L_out;
        }
        acts_[K].resize(static_cast<std::size_t>(max_batch_) * L * (K ? dims_[K - 1].c_out : 1));
        grad_acts_[K].resize(acts_[K].size());
        flat_dim_ = static_cast<int>(acts_[K].size()) / max_batch_;
        has_readout_ = net.has_readout;
        readout_w_.resize(net.has_readout ? net.readout_weights.size() : 0);
        grad_readout_w_.assign(readout_w_.size(), T(0));
        outputs_.resize(max_batch_);
        load_weights(net);
    }

    void load_weights(const Network& net) {
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            const auto& d = dims_[k];
            const auto& l = net.layers[k];
            for (int co = 0; co < d.c_out; ++co)
                for (int ci = 0; ci < d.c_in; ++ci)
                    for (int t = 0; t < d.F; ++t)
                        weights_[k][(static_cast<std::size_t>(co) * d.F + t) * d.c_in + ci] =
                            static_cast<T>(l.w(co, ci, t));
            for (int co = 0; co < d.c_out; ++co) biases_[k][co] = static_cast<T>(l.biases[co]);
        }
        if (has_readout_) {
            // network stores readout channel-major [c][a]; engine uses
            // channel-last flat index a * C + c
            const int K = static_cast<int>(dims_.size());
            const int C = K ? dims_[K - 1].c_out : 1;
            const int L = flat_dim_ / C;
            for (int c = 0; c < C; ++c)
                for (int a = 0; a < L; ++a)
                    readout_w_[static_cast<std::size_t>(a) * C + c] =
                        static_cast<T>(net.readout_weights[static_cast<std::size_t>(c) * L + a]);
            readout_b_ = static_cast<T>(net.readout_bias);
        }
    }

    void store_weights(Network& net) const {
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            const auto& d = dims_[k];
            auto& l = net.layers[k];
            for (int co = 0; co < d.c_out; ++co)
                for (int ci = 0; ci < d.c_in; ++ci)
                    for (int t = 0; t < d.F; ++t)
                        l.w(co, ci, t) = static_cast<double>(
                            weights_[k][(static_cast<std::size_t>(co) * d.F + t) * d.c_in + ci]);
            for (int co = 0; co < d.c_out; ++co) l.biases[co] = static_cast<double>(biases_[k][co]);
        }
        if (has_readout_) {
            const int K = static_cast<int>(dims_.size());
            const int C = K ? dims_[K - 1].c_out : 1;
            const int L = flat_dim_ / C;
            for (int c = 0; c < C; ++c)
                for (int a = 0; a < L; ++a)
                    net.readout_weights[static_cast<std::size_t>(c) * L + a] =
                        static_cast<double>(readout_w_[static_cast<std::size_t>(a) * C + c]);
            net.readout_bias = static_cast<double>(readout_b_);
        }
    }

    // Accumulated data-term gradients, written into the weight fields of a
    // same-architecture network.
    void store_gradients(Network& net) const {
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            const auto& d = dims_[k];
            auto& l = net.layers[k];
            for (int co = 0; co < d.c_out; ++co)
                for (int ci = 0; ci < d.c_in; ++ci)
                    for (int t = 0; t < d.F; ++t)
                        l.w(co, ci, t) = static_cast<double>(
                            grad_w_[k][(static_cast<std::size_t>(co) * d.F + t) * d.c_in + ci]);
            for (int co = 0; co < d.c_out; ++co) l.biases[co] = static_cast<double>(grad_b_[k][co]);
        }
        if (has_readout_) {
            const int K = static_cast<int>(dims_.size());
            const int C = K ? dims_[K - 1].c_out : 1;
            const int L = flat_dim_ / C;
            for (int c = 0; c < C; ++c)
                for (int a = 0; a < L; ++a)
                    net.readout_weights[static_cast<std::size_t>(c) * L + a] =
                        static_cast<double>(grad_readout_w_[static_cast<std::size_t>(a) * C + c]);
            net.readout_bias = static_cast<double>(grad_readout_b_);
        }
    }

    int depth() const { return static_cast<int>(dims_.size()); }
    int level_length(int k) const { return k == 0 ? (dims_.empty() ? flat_dim_ : dims_[0].L_in) : dims_[k - 1].L_out; }
    int level_channels(int k) const { return k == 0 ? 1 : dims_[k - 1].c_out; }

    // Runs the batch forward pass; xs[b] points at level-0 pixels.
    void forward(const std::vector<const double*>& xs) {
        batch_ = static_cast<int>(xs.size());
        const int K = depth();
        const int L0 = level_length(0);
        for (int b = 0; b < batch_; ++b)
            for (int a = 0; a < L0; ++a) acts_[0][static_cast<std::size_t>(b) * L0 + a] = static_cast<T>(xs[b][a]);
        for (int k = 0; k < K; ++k) forward_layer(k);
        if (has_readout_) {
            for (int b = 0; b < batch_; ++b) {
                const T* f = acts_[K].data() + static_cast<std::size_t>(b) * flat_dim_;
                T acc = readout_b_;
                for (int i = 0; i < flat_dim_; ++i) acc += readout_w_[i] * f[i];
                outputs_[b] = acc;
            }
        } else {
            std::fill(outputs_.begin(), outputs_.begin() + batch_, T(0));
        }
    }

    std::span<const T> level(int k, int b) const {
        const std::size_t n = static_cast<std::size_t>(level_length(k)) * level_channels(k);
        return std::span<const T>(acts_[k].data() + static_cast<std::size_t>(b) * n, n);
    }
    T output(int b) const { return outputs_[b]; }

    // Accumulates parameter gradients from d(loss)/d(output); zero entries
    // mark inactive examples whose backward work is skipped.
    void backward(std::span<const T> dout) {
        const int K = depth();
        std::vector<int> active;
        for (int b = 0; b < batch_; ++b)
            if (dout[b] != T(0)) active.push_back(b);
        if (active.empty()) return;

        if (has_readout_) {
            for (int b : active) {
                const T* f = acts_[K].data() + static_cast<std::size_t>(b) * flat_dim_;
                const T g = dout[b];
                for (int i = 0; i < flat_dim_; ++i) grad_readout_w_[i] += g * f[i];
                grad_readout_b_ += g;
            }
            for (int bi = 0; bi < static_cast<int>(active.size()); ++bi) {
                const int b = active[bi];
                T* df = grad_acts_[K].data() + static_cast<std::size_t>(bi) * flat_dim_;
                const T g = dout[b];
                for (int i = 0; i < flat_dim_; ++i) df[i] = g * readout_w_[i];
            }
        } else {
            throw parameter_error("backward: network has no readout");
        }
        for (int k = K - 1; k >= 0; --k) backward_layer(k, active);
    }

    void zero_gradients() {
        for (auto& g : grad_w_) std::fill(g.begin(), g.end(), T(0));
        for (auto& g : grad_b_) std::fill(g.begin(), g.end(), T(0));
        std::fill(grad_readout_w_.begin(), grad_readout_w_.end(), T(0));
        grad_readout_b_ = T(0);
    }

    // w <- w - lr (g + wd w) for filters and readout, biases without decay.
    void sgd_step(T lr, T weight_decay) {
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            for (std::size_t i = 0; i < weights_[k].size(); ++i)
                weights_[k][i] -= lr * (grad_w_[k][i] + weight_decay * weights_[k][i]);
            for (std::size_t i = 0; i < biases_[k].size(); ++i) biases_[k][i] -= lr * grad_b_[k][i];
        }
        for (std::size_t i = 0; i < readout_w_.size(); ++i)
            readout_w_[i] -= lr * (grad_readout_w_[i] + weight_decay * readout_w_[i]);
        readout_b_ -= lr * grad_readout_b_;
    }

    // 0.5 * |filter and readout weights|^2, the term weight decay penalizes.
    double weight_norm_half() const {
        double acc = 0;
        for (const auto& wk : weights_)
            for (T w : wk) acc += static_cast<double>(w) * static_cast<double>(w);
        for (T w : readout_w_) acc += static_cast<double>(w) * static_cast<double>(w);
        return 0.5 * acc;
    }

private:
    struct Dims {
        int c_in, c_out, F, L_in, L_out, stride, tap0;
    };

    void forward_layer(int k) {
        const auto& d = dims_[k];
        const int rows = batch_ * d.L_out;
        const int cols = d.F * d.c_in;
        T* P = cols_[k].data();
        const T* in = acts_[k].data();
        for (int b = 0; b < batch_; ++b) {
            const T* src = in + static_cast<std::size_t>(b) * d.L_in * d.c_in;
            T* row = P + static_cast<std::size_t>(b) * d.L_out * cols;
            for (int a = 0; a < d.L_out; ++a) {
                const int* g = gather_[k].data() + static_cast<std::size_t>(a) * d.F;
                for (int t = 0; t < d.F; ++t)
                    std::memcpy(row + static_cast<std::size_t>(t) * d.c_in,
                                src + static_cast<std::size_t>(g[t]) * d.c_in,
                                sizeof(T) * d.c_in);
                row += cols;
            }
        }
        T* Y = acts_[k + 1].data();
        if (static_cast<long long>(cols) * d.c_out <= 16) {
            for (int r = 0; r < rows; ++r)
                for (int co = 0; co < d.c_out; ++co) {
                    T acc = T(0);
                    const T* p = P + static_cast<std::size_t>(r) * cols;
                    const T* w = weights_[k].data() + static_cast<std::size_t>(co) * cols;
                    for (int i = 0; i < cols; ++i) acc += p[i] * w[i];
                    Y[static_cast<std::size_t>(r) * d.c_out + co] = acc;
                }
        } else {
            gemm(false, true, rows, d.c_out, cols, T(1), P, cols, weights_[k].data(), cols, T(0),
                 Y, d.c_out);
        }
        for (int r = 0; r < rows; ++r) {
            T* y = Y + static_cast<std::size_t>(r) * d.c_out;
            const T* bias = biases_[k].data();
            for (int c = 0; c < d.c_out; ++c) {
                const T v = y[c] + bias[c];
                y[c] = v > T(0) ? v : T(0);
            }
        }
    }

    // grad_acts_[k + 1] holds d(loss)/d(post-activation) for the packed
    // active examples; produces grad_acts_[k], grad_w_, grad_b_.
    void backward_layer(int k, const std::vector<int>& active) {
        const auto& d = dims_[k];
        const int n_act = static_cast<int>(active.size());
        const int rows = n_act * d.L_out;
        const int cols = d.F * d.c_in;

        // ReLU mask from stored post-activations.
        T* dY = grad_acts_[k + 1].data();
        for (int bi = 0; bi < n_act; ++bi) {
            const T* y = acts_[k + 1].data() +
                         static_cast<std::size_t>(active[bi]) * d.L_out * d.c_out;
            T* g = dY + static_cast<std::size_t>(bi) * d.L_out * d.c_out;
            for (int i = 0; i < d.L_out * d.c_out; ++i)
                if (y[i] <= T(0)) g[i] = T(0);
        }

        for (int r = 0; r < rows; ++r) {
            const T* g = dY + static_cast<std::size_t>(r) * d.c_out;
            for (int c = 0; c < d.c_out; ++c) grad_b_[k][c] += g[c];
        }

        // Pack the im2col rows of the active examples (no copy when all are).
        const T* P = cols_[k].data();
        std::vector<T> packed;
        if (n_act != batch_) {
            packed.resize(static_cast<std::size_t>(rows) * cols);
            for (int bi = 0; bi < n_act; ++bi)
                std::memcpy(packed.data() + static_cast<std::size_t>(bi) * d.L_out * cols,
                            cols_[k].data() + static_cast<std::size_t>(active[bi]) * d.L_out * cols,
                            sizeof(T) * d.L_out * cols);
            P = packed.data();
        }

        gemm(true, false, d.c_out, cols, rows, T(1), dY, d.c_out, P, cols, T(1),
             grad_w_[k].data(), cols);

        if (k == 0) return; // input needs no gradient

        T* dP = grad_cols_[k].data();
        gemm(false, false, rows, cols, d.c_out, T(1), dY, d.c_out, weights_[k].data(), cols, T(0),
             dP, cols);

        T* dX = grad_acts_[k].data();
        std::fill(dX, dX + static_cast<std::size_t>(n_act) * d.L_in * d.c_in, T(0));
        for (int bi = 0; bi < n_act; ++bi) {
            T* dst = dX + static_cast<std::size_t>(bi) * d.L_in * d.c_in;
            const T* row = dP + static_cast<std::size_t>(bi) * d.L_out * cols;
            for (int a = 0; a < d.L_out; ++a) {
                const int* g = gather_[k].data() + static_cast<std::size_t>(a) * d.F;
                for (int t = 0; t < d.F; ++t) {
                    T* acc = dst + static_cast<std::size_t>(g[t]) * d.c_in;
                    const T* val = row + static_cast<std::size_t>(t) * d.c_in;
                    for (int c = 0; c < d.c_in; ++c) acc[c] += val[c];
                }
                row += cols;
            }
        }
    }

    int max_batch_ = 1;
    int batch_ = 0;
    int flat_dim_ = 0;
    bool has_readout_ = false;
    std::vector<Dims> dims_;
    std::vector<std::vector<int>> gather_;
    std::vector<std::vector<T>> weights_, biases_, grad_w_, grad_b_;
    std::vector<std::vector<T>> cols_, grad_cols_, acts_, grad_acts_;
    std::vector<T> readout_w_, grad_readout_w_;
    T readout_b_ = T(0), grad_readout_b_ = T(0);
    std::vector<T> outputs_;
};

} // namespace detail

// Reusable single-input forward pass; level(k) views stay valid until the
// next call.
class Forwarder {
public:
    explicit Forwarder(const Network& net) : engine_(net, 1) {}

    void run(std::span<const double> x) {
        ptr_[0] = x.data();
        engine_.forward(ptr_);
    }
    std::span<const double> level(int k) const { return engine_.level(k, 0); }
    double output() const { return engine_.output(0); }
    int depth() const { return engine_.depth(); }
    int level_length(int k) const { return engine_.level_length(k); }
    int level_channels(int k) const { return engine_.level_channels(k); }

private:
    detail::ConvEngine<double> engine_;
    std::vector<const double*> ptr_{nullptr};
};

// Full per-level taps in channel-major layout.
inline LayerTaps forward(const Network& net, std::span<const double> x) {
    if (static_cast<int>(x.size()) != net.input_length)
        throw parameter_error("forward: input length does not match the network");
    Forwarder fwd(net);
    fwd.run(x);
    LayerTaps taps;
    const int K = net.depth();
    taps.reps.resize(K + 1);
    taps.lengths.resize(K + 1);
    taps.channels.resize(K + 1);
    for (int k = 0; k <= K; ++k) {
        const int L = net.level_length(k);
        const int C = net.level_channels(k);
        taps.lengths[k] = L;
        taps.channels[k] = C;
        auto lvl = fwd.level(k);
        taps.reps[k].resize(lvl.size());
        for (int a = 0; a < L; ++a)
            for (int c = 0; c < C; ++c)
                taps.reps[k][static_cast<std::size_t>(c) * L + a] = lvl[static_cast<std::size_t>(a) * C + c];
    }
    taps.has_output = net.has_readout;
    taps.output = fwd.output();
    return taps;
}

inline LayerTaps forward(const Network& net, const data::Input& x) { return forward(net, x.pixels); }

} // namespace scalelab::net
