// ============================================================================
// logistic.hpp - multinomial logistic regression trained by full-batch
// gradient descent on L2-regularized cross-entropy
// ============================================================================
#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bpsd/common.hpp"

namespace bpsd {

struct LogisticParams {
    double learning_rate = 0.1;
    int epochs = 500;
    double l2 = 1e-4;
};

inline std::vector<double> softmax(std::vector<double> logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (auto& v : logits) {
        v = std::exp(v - m);
        sum += v;
    }
    for (auto& v : logits) v /= sum;
    return logits;
}

class LogisticModel {
public:
    LogisticModel() = default;
    LogisticModel(int n_classes, int dim)
        : n_classes_(n_classes), dim_(dim),
          weights_(std::size_t(n_classes) * std::size_t(dim), 0.0),
          bias_(std::size_t(n_classes), 0.0) {}

    int n_classes() const { return n_classes_; }
    int dim() const { return dim_; }
    std::vector<double>& weights() { return weights_; }
    const std::vector<double>& weights() const { return weights_; }
    std::vector<double>& bias() { return bias_; }
    const std::vector<double>& loss_history() { return loss_history_; }
    std::vector<double>& mutable_loss_history() { return loss_history_; }

    std::vector<double> logits(const std::vector<double>& x) const {
        if (int(x.size()) != dim_)
            throw TrainError("logistic predict: expected " + std::to_string(dim_) +
                             " features, got " + std::to_string(x.size()));
        std::vector<double> z(std::size_t(n_classes_), 0.0);
        for (int c = 0; c < n_classes_; ++c) {
            double acc = bias_[std::size_t(c)];
            const double* w = &weights_[std::size_t(c) * std::size_t(dim_)];
            for (int f = 0; f < dim_; ++f) acc += w[f] * x[std::size_t(f)];
            z[std::size_t(c)] = acc;
        }
        return z;
    }

    std::vector<double> predict_proba(const std::vector<double>& x) const {
        return softmax(logits(x));
    }

    nlohmann::json to_json() const {
        return {{"format_version", kModelFormatVersion},
                {"kind", "logistic"},
                {"n_classes", n_classes_},
                {"dim", dim_},
                {"weights", weights_},
                {"bias", bias_}};
    }

    static LogisticModel from_json(const nlohmann::json& j) {
        LogisticModel m(j.at("n_classes").get<int>(), j.at("dim").get<int>());
        m.weights_ = j.at("weights").get<std::vector<double>>();
        m.bias_ = j.at("bias").get<std::vector<double>>();
        return m;
    }

private:
    int n_classes_ = 0;
    int dim_ = 0;
    std::vector<double> weights_; // n_classes x dim, row-major
    std::vector<double> bias_;
    std::vector<double> loss_history_;
};

/// Deterministic fit: zero init, fixed epoch count. Callers are expected to
/// pass scaled inputs.
inline LogisticModel fit_logistic(const std::vector<std::vector<double>>& x,
                                  const std::vector<int>& y, int n_classes,
                                  const LogisticParams& params = {}) {
    if (x.empty()) throw TrainError("fit_logistic: empty training set");
    if (std::set<int>(y.begin(), y.end()).size() < 2)
        throw TrainError("fit_logistic: single-class training set");
    const int dim = int(x.front().size());
    const std::size_t n = x.size();
    LogisticModel model(n_classes, dim);

    std::vector<double> grad_w(std::size_t(n_classes) * std::size_t(dim));
    std::vector<double> grad_b(std::size_t(n_classes));
    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        std::fill(grad_w.begin(), grad_w.end(), 0.0);
        std::fill(grad_b.begin(), grad_b.end(), 0.0);
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto p = model.predict_proba(x[i]);
            loss -= std::log(std::max(p[std::size_t(y[i])], 1e-300));
            for (int c = 0; c < n_classes; ++c) {
                const double g = p[std::size_t(c)] - (c == y[i] ? 1.0 : 0.0);
                grad_b[std::size_t(c)] += g;
                double* gw = &grad_w[std::size_t(c) * std::size_t(dim)];
                const auto& xi = x[i];
                for (int f = 0; f < dim; ++f) gw[f] += g * xi[std::size_t(f)];
            }
        }
        loss /= double(n);
        auto& w = model.weights();
        for (std::size_t k = 0; k < w.size(); ++k)
            loss += 0.5 * params.l2 * w[k] * w[k];
        model.mutable_loss_history().push_back(loss);

        for (std::size_t k = 0; k < w.size(); ++k)
            w[k] -= params.learning_rate * (grad_w[k] / double(n) + params.l2 * w[k]);
        for (int c = 0; c < n_classes; ++c)
            model.bias()[std::size_t(c)] -=
                params.learning_rate * grad_b[std::size_t(c)] / double(n);
    }
    return model;
}

} // namespace bpsd
