// ============================================================================
// tcn.hpp - temporal convolutional network over the 11x5 signal window
//
// Causal dilated conv blocks with residual connections (dilations 1,2,4,
// kernel 2), a linear latent head (hidden -> 256) read at the last time step,
// and a softmax classifier head. Forward, backward, and Adam are implemented
// by hand in double precision; gradient_check verifies the backward pass
// against central finite differences.
// ============================================================================
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bpsd/common.hpp"
#include "bpsd/logistic.hpp" // softmax
#include "bpsd/rng.hpp"

namespace bpsd {

struct TcnConfig {
    int in_channels = 11;
    int seq_len = 5;
    int blocks = 3; // dilation of block b is 2^b
    int kernel_size = 2;
    int hidden_channels = 64;
    int latent_dim = 256;
    int n_classes = 3;
    double dropout = 0.1;
    int epochs = 50;
    int batch_size = 64;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;

    int dilation(int block) const { return 1 << block; }

    int receptive_field() const {
        int sum = 0;
        for (int b = 0; b < blocks; ++b) sum += dilation(b);
        return 1 + (kernel_size - 1) * sum;
    }

    void validate() const {
        if (blocks > 0 && receptive_field() < seq_len)
            throw ConfigError("tcn: receptive field " + std::to_string(receptive_field()) +
                              " smaller than sequence length " + std::to_string(seq_len));
        if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("tcn: dropout must be in [0,1)");
    }
};

namespace tcn_detail {

struct Param {
    std::string name;
    std::vector<int> shape;
    std::vector<double> w;
    std::vector<double> g; // gradient accumulator
    std::vector<double> m; // Adam first moment
    std::vector<double> v; // Adam second moment

    std::size_t size() const { return w.size(); }
};

// channel-major time series buffer: v[c * t_len + t]
struct Map {
    int ch = 0;
    int t_len = 0;
    std::vector<double> v;

    void resize(int c, int t) {
        ch = c;
        t_len = t;
        v.assign(std::size_t(c) * std::size_t(t), 0.0);
    }
    double& at(int c, int t) { return v[std::size_t(c) * std::size_t(t_len) + std::size_t(t)]; }
    double at(int c, int t) const {
        return v[std::size_t(c) * std::size_t(t_len) + std::size_t(t)];
    }
    void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

struct BlockWork {
    Map input;   // block input
    Map y1, a1d; // conv1 pre-activation; post relu+dropout
    Map y2, a2d;
    Map sum;     // residual + conv path, pre final relu
    Map out;
    std::vector<double> mask1, mask2; // dropout multipliers (1 when eval)
};

struct Workspace {
    std::vector<BlockWork> blocks;
    std::vector<double> h;      // readout at last time step
    std::vector<double> latent;
    std::vector<double> logits;
    std::vector<double> probs;
};

} // namespace tcn_detail

class TcnNetwork {
public:
    TcnNetwork() = default;

    explicit TcnNetwork(const TcnConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        for (int b = 0; b < cfg_.blocks; ++b) {
            const int in_ch = b == 0 ? cfg_.in_channels : cfg_.hidden_channels;
            const int out_ch = cfg_.hidden_channels;
            add_param("block" + std::to_string(b) + ".conv1.w",
                      {out_ch, in_ch, cfg_.kernel_size});
            add_param("block" + std::to_string(b) + ".conv1.b", {out_ch});
            add_param("block" + std::to_string(b) + ".conv2.w",
                      {out_ch, out_ch, cfg_.kernel_size});
            add_param("block" + std::to_string(b) + ".conv2.b", {out_ch});
            if (in_ch != out_ch) {
                add_param("block" + std::to_string(b) + ".proj.w", {out_ch, in_ch});
                add_param("block" + std::to_string(b) + ".proj.b", {out_ch});
            }
        }
        const int readout_ch = cfg_.blocks > 0 ? cfg_.hidden_channels : cfg_.in_channels;
        add_param("latent.w", {cfg_.latent_dim, readout_ch});
        add_param("latent.b", {cfg_.latent_dim});
        add_param("head.w", {cfg_.n_classes, cfg_.latent_dim});
        add_param("head.b", {cfg_.n_classes});
        init_weights();
    }

    const TcnConfig& config() const { return cfg_; }
    std::vector<tcn_detail::Param>& params() { return params_; }
    const std::vector<tcn_detail::Param>& params() const { return params_; }

    tcn_detail::Param& param(const std::string& name) {
        for (auto& p : params_)
            if (p.name == name) return p;
        throw TrainError("tcn: unknown parameter '" + name + "'");
    }
    const tcn_detail::Param& param(const std::string& name) const {
        return const_cast<TcnNetwork*>(this)->param(name);
    }

    /// window is channel-major: window[c * seq_len + t].
    void forward(const std::vector<double>& window, tcn_detail::Workspace& ws,
                 bool training = false, Rng* dropout_rng = nullptr) const {
        using tcn_detail::Map;
        if (int(window.size()) != cfg_.in_channels * cfg_.seq_len)
            throw TrainError("tcn forward: window shape mismatch");

        ws.blocks.resize(std::size_t(cfg_.blocks));
        const int T = cfg_.seq_len;
        Map current;
        current.resize(cfg_.in_channels, T);
        current.v = window;

        for (int b = 0; b < cfg_.blocks; ++b) {
            auto& bw = ws.blocks[std::size_t(b)];
            const int in_ch = b == 0 ? cfg_.in_channels : cfg_.hidden_channels;
            const int out_ch = cfg_.hidden_channels;
            const int d = cfg_.dilation(b);
            bw.input = current;

            const auto& w1 = param_at(prefix(b) + ".conv1.w");
            const auto& b1 = param_at(prefix(b) + ".conv1.b");
            conv_forward(bw.input, w1, b1, out_ch, in_ch, d, bw.y1);
            relu_dropout(bw.y1, bw.a1d, bw.mask1, training, dropout_rng);

            const auto& w2 = param_at(prefix(b) + ".conv2.w");
            const auto& b2 = param_at(prefix(b) + ".conv2.b");
            conv_forward(bw.a1d, w2, b2, out_ch, out_ch, d, bw.y2);
            relu_dropout(bw.y2, bw.a2d, bw.mask2, training, dropout_rng);

            bw.sum.resize(out_ch, T);
            if (in_ch != out_ch) {
                const auto& wp = param_at(prefix(b) + ".proj.w");
                const auto& bp = param_at(prefix(b) + ".proj.b");
                for (int o = 0; o < out_ch; ++o)
                    for (int t = 0; t < T; ++t) {
                        double acc = bp.w[std::size_t(o)];
                        for (int i = 0; i < in_ch; ++i)
                            acc += wp.w[std::size_t(o) * std::size_t(in_ch) + std::size_t(i)] *
                                   bw.input.at(i, t);
                        bw.sum.at(o, t) = acc + bw.a2d.at(o, t);
                    }
            } else {
                for (int o = 0; o < out_ch; ++o)
                    for (int t = 0; t < T; ++t)
                        bw.sum.at(o, t) = bw.input.at(o, t) + bw.a2d.at(o, t);
            }
            bw.out.resize(out_ch, T);
            for (std::size_t i = 0; i < bw.sum.v.size(); ++i)
                bw.out.v[i] = bw.sum.v[i] > 0.0 ? bw.sum.v[i] : 0.0;
            current = bw.out;
        }

        const int readout_ch = cfg_.blocks > 0 ? cfg_.hidden_channels : cfg_.in_channels;
        ws.h.assign(std::size_t(readout_ch), 0.0);
        for (int c = 0; c < readout_ch; ++c) ws.h[std::size_t(c)] = current.at(c, T - 1);

        const auto& wl = param_at("latent.w");
        const auto& bl = param_at("latent.b");
        ws.latent.assign(std::size_t(cfg_.latent_dim), 0.0);
        for (int j = 0; j < cfg_.latent_dim; ++j) {
            double acc = bl.w[std::size_t(j)];
            const double* w = &wl.w[std::size_t(j) * std::size_t(readout_ch)];
            for (int c = 0; c < readout_ch; ++c) acc += w[c] * ws.h[std::size_t(c)];
            ws.latent[std::size_t(j)] = acc;
        }

        const auto& wc = param_at("head.w");
        const auto& bc = param_at("head.b");
        ws.logits.assign(std::size_t(cfg_.n_classes), 0.0);
        for (int c = 0; c < cfg_.n_classes; ++c) {
            double acc = bc.w[std::size_t(c)];
            const double* w = &wc.w[std::size_t(c) * std::size_t(cfg_.latent_dim)];
            for (int j = 0; j < cfg_.latent_dim; ++j) acc += w[j] * ws.latent[std::size_t(j)];
            ws.logits[std::size_t(c)] = acc;
        }
        ws.probs = softmax(ws.logits);
    }

    struct Prediction {
        std::vector<double> latent;
        std::vector<double> probs;
    };

    /// Inference-mode forward (dropout disabled).
    Prediction predict(const std::vector<double>& window) const {
        tcn_detail::Workspace ws;
        forward(window, ws);
        return {ws.latent, ws.probs};
    }

    std::vector<double> extract_latent(const std::vector<double>& window) const {
        return predict(window).latent;
    }

    /// Backward pass for cross-entropy with the given per-sample weight;
    /// gradients accumulate into Param::g. `ws` must come from a forward call.
    void backward(const tcn_detail::Workspace& ws, int label, double weight) {
        using tcn_detail::Map;
        const int T = cfg_.seq_len;
        const int readout_ch = cfg_.blocks > 0 ? cfg_.hidden_channels : cfg_.in_channels;

        std::vector<double> du(ws.probs);
        du[std::size_t(label)] -= 1.0;
        for (auto& v : du) v *= weight;

        auto& wc = param("head.w");
        auto& bc = param("head.b");
        std::vector<double> dz(std::size_t(cfg_.latent_dim), 0.0);
        for (int c = 0; c < cfg_.n_classes; ++c) {
            bc.g[std::size_t(c)] += du[std::size_t(c)];
            double* gw = &wc.g[std::size_t(c) * std::size_t(cfg_.latent_dim)];
            const double* w = &wc.w[std::size_t(c) * std::size_t(cfg_.latent_dim)];
            for (int j = 0; j < cfg_.latent_dim; ++j) {
                gw[j] += du[std::size_t(c)] * ws.latent[std::size_t(j)];
                dz[std::size_t(j)] += w[j] * du[std::size_t(c)];
            }
        }

        auto& wl = param("latent.w");
        auto& bl = param("latent.b");
        std::vector<double> dh(std::size_t(readout_ch), 0.0);
        for (int j = 0; j < cfg_.latent_dim; ++j) {
            bl.g[std::size_t(j)] += dz[std::size_t(j)];
            double* gw = &wl.g[std::size_t(j) * std::size_t(readout_ch)];
            const double* w = &wl.w[std::size_t(j) * std::size_t(readout_ch)];
            for (int c = 0; c < readout_ch; ++c) {
                gw[c] += dz[std::size_t(j)] * ws.h[std::size_t(c)];
                dh[std::size_t(c)] += w[c] * dz[std::size_t(j)];
            }
        }

        Map dout;
        dout.resize(readout_ch, T);
        for (int c = 0; c < readout_ch; ++c) dout.at(c, T - 1) = dh[std::size_t(c)];

        for (int b = cfg_.blocks - 1; b >= 0; --b) {
            const auto& bw = ws.blocks[std::size_t(b)];
            const int in_ch = b == 0 ? cfg_.in_channels : cfg_.hidden_channels;
            const int out_ch = cfg_.hidden_channels;
            const int d = cfg_.dilation(b);

            Map ds; // through the post-sum ReLU
            ds.resize(out_ch, T);
            for (std::size_t i = 0; i < ds.v.size(); ++i)
                ds.v[i] = bw.sum.v[i] > 0.0 ? dout.v[i] : 0.0;

            Map dx;
            dx.resize(in_ch, T);
            if (in_ch != out_ch) {
                auto& wp = param(prefix(b) + ".proj.w");
                auto& bp = param(prefix(b) + ".proj.b");
                for (int o = 0; o < out_ch; ++o)
                    for (int t = 0; t < T; ++t) {
                        const double g = ds.at(o, t);
                        if (g == 0.0) continue;
                        bp.g[std::size_t(o)] += g;
                        for (int i = 0; i < in_ch; ++i) {
                            wp.g[std::size_t(o) * std::size_t(in_ch) + std::size_t(i)] +=
                                g * bw.input.at(i, t);
                            dx.at(i, t) +=
                                wp.w[std::size_t(o) * std::size_t(in_ch) + std::size_t(i)] * g;
                        }
                    }
            } else {
                for (std::size_t i = 0; i < ds.v.size(); ++i) dx.v[i] += ds.v[i];
            }

            // conv path: ds -> dropout2 -> relu2 -> conv2 -> dropout1 -> relu1 -> conv1
            Map dy2;
            dy2.resize(out_ch, T);
            for (std::size_t i = 0; i < dy2.v.size(); ++i) {
                const double g = ds.v[i] * bw.mask2[i];
                dy2.v[i] = bw.y2.v[i] > 0.0 ? g : 0.0;
            }
            Map da1d;
            da1d.resize(out_ch, T);
            conv_backward(bw.a1d, dy2, prefix(b) + ".conv2", out_ch, out_ch, d, da1d);

            Map dy1;
            dy1.resize(out_ch, T);
            for (std::size_t i = 0; i < dy1.v.size(); ++i) {
                const double g = da1d.v[i] * bw.mask1[i];
                dy1.v[i] = bw.y1.v[i] > 0.0 ? g : 0.0;
            }
            Map dx_conv;
            dx_conv.resize(in_ch, T);
            conv_backward(bw.input, dy1, prefix(b) + ".conv1", out_ch, in_ch, d, dx_conv);

            for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dx_conv.v[i];
            dout = std::move(dx);
        }
    }

    void zero_grad() {
        for (auto& p : params_) std::fill(p.g.begin(), p.g.end(), 0.0);
    }

    void adam_step(double lr, double beta1, double beta2, double eps, long long step) {
        const double bc1 = 1.0 - std::pow(beta1, double(step));
        const double bc2 = 1.0 - std::pow(beta2, double(step));
        for (auto& p : params_) {
            for (std::size_t i = 0; i < p.size(); ++i) {
                p.m[i] = beta1 * p.m[i] + (1.0 - beta1) * p.g[i];
                p.v[i] = beta2 * p.v[i] + (1.0 - beta2) * p.g[i] * p.g[i];
                const double mhat = p.m[i] / bc1;
                const double vhat = p.v[i] / bc2;
                p.w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["format_version"] = kModelFormatVersion;
        j["kind"] = "tcn";
        j["config"] = {{"in_channels", cfg_.in_channels},
                       {"seq_len", cfg_.seq_len},
                       {"blocks", cfg_.blocks},
                       {"kernel_size", cfg_.kernel_size},
                       {"hidden_channels", cfg_.hidden_channels},
                       {"latent_dim", cfg_.latent_dim},
                       {"n_classes", cfg_.n_classes},
                       {"dropout", cfg_.dropout},
                       {"epochs", cfg_.epochs},
                       {"batch_size", cfg_.batch_size},
                       {"learning_rate", cfg_.learning_rate},
                       {"seed", cfg_.seed}};
        nlohmann::json layers = nlohmann::json::object();
        for (const auto& p : params_)
            layers[p.name] = {{"shape", p.shape}, {"data", p.w}};
        j["layers"] = std::move(layers);
        return j;
    }

    static TcnNetwork from_json(const nlohmann::json& j) {
        TcnConfig cfg;
        const auto& c = j.at("config");
        cfg.in_channels = c.at("in_channels").get<int>();
        cfg.seq_len = c.at("seq_len").get<int>();
        cfg.blocks = c.at("blocks").get<int>();
        cfg.kernel_size = c.at("kernel_size").get<int>();
        cfg.hidden_channels = c.at("hidden_channels").get<int>();
        cfg.latent_dim = c.at("latent_dim").get<int>();
        cfg.n_classes = c.at("n_classes").get<int>();
        cfg.dropout = c.at("dropout").get<double>();
        cfg.epochs = c.at("epochs").get<int>();
        cfg.batch_size = c.at("batch_size").get<int>();
        cfg.learning_rate = c.at("learning_rate").get<double>();
        cfg.seed = c.at("seed").get<std::uint64_t>();
        TcnNetwork net(cfg);
        for (auto& p : net.params_) {
            const auto& lj = j.at("layers").at(p.name);
            p.w = lj.at("data").get<std::vector<double>>();
            if (p.w.size() != p.size() && !p.shape.empty())
                throw DataError("tcn: shape mismatch for layer " + p.name);
        }
        return net;
    }

private:
    std::string prefix(int b) const { return "block" + std::to_string(b); }

    void add_param(const std::string& name, std::vector<int> shape) {
        tcn_detail::Param p;
        p.name = name;
        p.shape = std::move(shape);
        std::size_t n = 1;
        for (const int s : p.shape) n *= std::size_t(s);
        p.w.assign(n, 0.0);
        p.g.assign(n, 0.0);
        p.m.assign(n, 0.0);
        p.v.assign(n, 0.0);
        params_.push_back(std::move(p));
    }

    void init_weights() {
        // fan-in scaled uniform init for weights, zero biases
        for (std::size_t pi = 0; pi < params_.size(); ++pi) {
            auto& p = params_[pi];
            if (p.shape.size() < 2) continue;
            std::size_t fan_in = 1;
            for (std::size_t s = 1; s < p.shape.size(); ++s) fan_in *= std::size_t(p.shape[s]);
            const double bound = 1.0 / std::sqrt(double(fan_in));
            Rng rng(derive_stream(cfg_.seed, 0x1217ULL, pi));
            for (auto& w : p.w) w = rng.uniform(-bound, bound);
        }
    }

    const tcn_detail::Param& param_at(const std::string& name) const { return param(name); }

    void conv_forward(const tcn_detail::Map& in, const tcn_detail::Param& w,
                      const tcn_detail::Param& b, int out_ch, int in_ch, int dilation,
                      tcn_detail::Map& out) const {
        const int T = cfg_.seq_len;
        const int K = cfg_.kernel_size;
        out.resize(out_ch, T);
        for (int o = 0; o < out_ch; ++o) {
            for (int t = 0; t < T; ++t) {
                double acc = b.w[std::size_t(o)];
                for (int k = 0; k < K; ++k) {
                    const int tau = t - (K - 1 - k) * dilation; // left padding = zeros
                    if (tau < 0) continue;
                    const double* wk =
                        &w.w[(std::size_t(o) * std::size_t(in_ch)) * std::size_t(K) +
                             std::size_t(k)];
                    for (int i = 0; i < in_ch; ++i)
                        acc += wk[std::size_t(i) * std::size_t(K)] * in.at(i, tau);
                }
                out.at(o, t) = acc;
            }
        }
    }

    void conv_backward(const tcn_detail::Map& in, const tcn_detail::Map& dy,
                       const std::string& name, int out_ch, int in_ch, int dilation,
                       tcn_detail::Map& din) {
        const int T = cfg_.seq_len;
        const int K = cfg_.kernel_size;
        auto& w = param(name + ".w");
        auto& b = param(name + ".b");
        for (int o = 0; o < out_ch; ++o) {
            for (int t = 0; t < T; ++t) {
                const double g = dy.at(o, t);
                if (g == 0.0) continue;
                b.g[std::size_t(o)] += g;
                for (int k = 0; k < K; ++k) {
                    const int tau = t - (K - 1 - k) * dilation;
                    if (tau < 0) continue;
                    const std::size_t base =
                        (std::size_t(o) * std::size_t(in_ch)) * std::size_t(K) + std::size_t(k);
                    for (int i = 0; i < in_ch; ++i) {
                        w.g[base + std::size_t(i) * std::size_t(K)] += g * in.at(i, tau);
                        din.at(i, tau) += w.w[base + std::size_t(i) * std::size_t(K)] * g;
                    }
                }
            }
        }
    }

    void relu_dropout(const tcn_detail::Map& pre, tcn_detail::Map& post,
                      std::vector<double>& mask, bool training, Rng* rng) const {
        post.resize(pre.ch, pre.t_len);
        mask.assign(pre.v.size(), 1.0);
        const double p = cfg_.dropout;
        for (std::size_t i = 0; i < pre.v.size(); ++i) {
            double a = pre.v[i] > 0.0 ? pre.v[i] : 0.0;
            if (training && p > 0.0) {
                if (rng->uniform() < p) {
                    mask[i] = 0.0;
                    a = 0.0;
                } else {
                    mask[i] = 1.0 / (1.0 - p);
                    a *= mask[i];
                }
            }
            post.v[i] = a;
        }
    }

    TcnConfig cfg_;
    std::vector<tcn_detail::Param> params_;
};

// ----------------------------------------------------------------------------
// Training
// ----------------------------------------------------------------------------

/// Balanced class weights, proportional to 1 / class count.
inline std::vector<double> class_weights_from_labels(const std::vector<int>& labels,
                                                     int n_classes) {
    std::vector<double> counts(std::size_t(n_classes), 0.0);
    for (const int y : labels) counts[std::size_t(y)] += 1.0;
    int present = 0;
    for (const double c : counts) present += c > 0.0;
    std::vector<double> weights(std::size_t(n_classes), 0.0);
    for (int c = 0; c < n_classes; ++c)
        if (counts[std::size_t(c)] > 0.0)
            weights[std::size_t(c)] =
                double(labels.size()) / (double(present) * counts[std::size_t(c)]);
    return weights;
}

struct TcnTrainStats {
    std::vector<double> epoch_loss; // weighted mean cross-entropy per epoch
};

/// Class-weighted cross-entropy training with Adam. Deterministic given the
/// config seed: init, shuffles, and dropout all derive from it.
inline TcnTrainStats train_tcn(TcnNetwork& net, const std::vector<std::vector<double>>& windows,
                               const std::vector<int>& labels) {
    const TcnConfig& cfg = net.config();
    if (windows.empty()) throw TrainError("train_tcn: empty training set");
    if (windows.size() != labels.size()) throw TrainError("train_tcn: window/label mismatch");
    if (std::set<int>(labels.begin(), labels.end()).size() < 2)
        throw TrainError("train_tcn: single-class input");

    const auto weights = class_weights_from_labels(labels, cfg.n_classes);
    Rng dropout_rng(derive_stream(cfg.seed, 0xD409ULL));

    TcnTrainStats stats;
    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), 0);
    tcn_detail::Workspace ws;
    long long adam_t = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_stream(cfg.seed, 0x50FFULL, std::uint64_t(epoch)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.index(i)]);

        double epoch_loss = 0.0;
        double epoch_weight = 0.0;
        for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + std::size_t(cfg.batch_size));
            double batch_weight = 0.0;
            for (std::size_t i = start; i < end; ++i)
                batch_weight += weights[std::size_t(labels[order[i]])];
            if (batch_weight <= 0.0) continue;

            net.zero_grad();
            for (std::size_t i = start; i < end; ++i) {
                const std::size_t idx = order[i];
                net.forward(windows[idx], ws, /*training=*/true, &dropout_rng);
                const double w = weights[std::size_t(labels[idx])];
                const double ce =
                    -std::log(std::max(ws.probs[std::size_t(labels[idx])], 1e-300));
                epoch_loss += w * ce;
                epoch_weight += w;
                net.backward(ws, labels[idx], w / batch_weight);
            }
            ++adam_t;
            net.adam_step(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps, adam_t);
        }
        stats.epoch_loss.push_back(epoch_weight > 0.0 ? epoch_loss / epoch_weight : 0.0);
    }
    return stats;
}

// ----------------------------------------------------------------------------
// Gradient verification
// ----------------------------------------------------------------------------

/// Compares the analytic gradient with central finite differences (step 1e-5)
/// on n_probes randomly chosen parameters; returns the max relative error.
/// Dropout is disabled throughout.
inline double gradient_check(TcnNetwork& net, const std::vector<double>& window, int label,
                             int n_probes, std::uint64_t probe_seed = 7) {
    tcn_detail::Workspace ws;
    net.zero_grad();
    net.forward(window, ws);
    net.backward(ws, label, 1.0);

    std::vector<std::vector<double>> analytic;
    for (const auto& p : net.params()) analytic.push_back(p.g);

    Rng rng(probe_seed);
    const double h = 1e-5;
    double max_rel = 0.0;
    for (int probe = 0; probe < n_probes; ++probe) {
        const std::size_t pi = rng.index(net.params().size());
        auto& p = net.params()[pi];
        const std::size_t wi = rng.index(p.size());
        const double saved = p.w[wi];

        p.w[wi] = saved + h;
        net.forward(window, ws);
        const double loss_plus = -std::log(std::max(ws.probs[std::size_t(label)], 1e-300));
        p.w[wi] = saved - h;
        net.forward(window, ws);
        const double loss_minus = -std::log(std::max(ws.probs[std::size_t(label)], 1e-300));
        p.w[wi] = saved;

        const double numeric = (loss_plus - loss_minus) / (2.0 * h);
        const double a = analytic[pi][wi];
        const double rel =
            std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1e-8});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

/// Euclidean norm of the full analytic gradient at (window, label).
inline double gradient_norm(TcnNetwork& net, const std::vector<double>& window, int label) {
    tcn_detail::Workspace ws;
    net.zero_grad();
    net.forward(window, ws);
    net.backward(ws, label, 1.0);
    double sq = 0.0;
    for (const auto& p : net.params())
        for (const double g : p.g) sq += g * g;
    return std::sqrt(sq);
}

} // namespace bpsd
