// ============================================================================
// featurize.hpp - windowing, horizon labeling, normalization, oversampling,
// feature selection
// ============================================================================
#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "bpsd/cohort.hpp"
#include "bpsd/forest.hpp"
#include "bpsd/rng.hpp"

namespace bpsd {

inline constexpr int kLagCount = 5; // current slot plus 15/30/45/60 min back
inline constexpr int kSignalFeatureCount = kSignalCount * kLagCount; // 55
inline constexpr int kFeatureDim = kSignalFeatureCount + 3;          // + demographics
inline constexpr std::int64_t kHorizonSeconds = 4 * 3600;

enum class SplitTag : std::uint8_t { Unassigned = 0, Train = 1, Test = 2 };

/// One labeled window: 55 lagged signal values (oldest lag first) followed by
/// age, sex, education_years.
struct Instance {
    std::string patient_id;
    Instant t = 0; // start of the current slot
    std::array<double, kFeatureDim> features{};
    BpsdClass label4 = BpsdClass::Normal;
    bool occurred = false;
    SplitTag split = SplitTag::Unassigned;
};

/// Guard called by every fit-path entry point: instances tagged as test data
/// must never be fitted on.
inline void require_train_only(const std::vector<Instance>& instances, const char* op) {
    for (const auto& inst : instances)
        if (inst.split == SplitTag::Test)
            throw LeakageError(std::string(op) + ": test-tagged instance (patient " +
                               inst.patient_id + ") reached a fit call");
}

// ----------------------------------------------------------------------------
// Windowing + horizon labeling
// ----------------------------------------------------------------------------

/// Label for the horizon (t_end, t_end + 4h]: class of the earliest event in
/// the window, ties broken by class priority, Normal when empty.
inline BpsdClass horizon_label(const std::vector<BpsdEvent>& sorted_events, Instant t_end) {
    const Instant horizon_end = t_end + kHorizonSeconds;
    const auto it = std::upper_bound(
        sorted_events.begin(), sorted_events.end(), t_end,
        [](Instant value, const BpsdEvent& e) { return value < e.timestamp; });
    if (it == sorted_events.end() || it->timestamp > horizon_end) return BpsdClass::Normal;
    BpsdClass best = it->bpsd_class;
    for (auto jt = std::next(it); jt != sorted_events.end() && jt->timestamp == it->timestamp;
         ++jt)
        if (class_priority_rank(jt->bpsd_class) < class_priority_rank(best))
            best = jt->bpsd_class;
    return best;
}

/// Emits one instance per slot whose five-slot window (t-4..t) is fully
/// present. Events must be sorted by timestamp.
inline std::vector<Instance> build_instances(const SignalGrid& grid,
                                             const std::vector<BpsdEvent>& events,
                                             const Demographics& demographics) {
    std::vector<Instance> out;
    if (grid.cells.size() < std::size_t(kLagCount)) return out;
    for (std::size_t t = kLagCount - 1; t < grid.cells.size(); ++t) {
        bool window_present = true;
        for (int lag = 0; lag < kLagCount && window_present; ++lag)
            window_present = grid.cells[t - std::size_t(lag)].has_value();
        if (!window_present) continue;

        Instance inst;
        inst.patient_id = grid.patient_id;
        inst.t = grid.slot_start(t);
        for (int j = 0; j < kLagCount; ++j) { // oldest slot first
            const auto& cell = *grid.cells[t - std::size_t(kLagCount - 1 - j)];
            for (int s = 0; s < kSignalCount; ++s)
                inst.features[std::size_t(j * kSignalCount + s)] = cell[std::size_t(s)];
        }
        inst.features[kSignalFeatureCount + 0] = double(demographics.age);
        inst.features[kSignalFeatureCount + 1] = double(int(demographics.sex));
        inst.features[kSignalFeatureCount + 2] = double(demographics.education_years);

        inst.label4 = horizon_label(events, inst.t + kSlotSeconds);
        inst.occurred = inst.label4 != BpsdClass::Normal;
        out.push_back(std::move(inst));
    }
    return out;
}

// ----------------------------------------------------------------------------
// Normalization
// ----------------------------------------------------------------------------

/// Per-feature z-score with population standard deviation. Features with
/// stdev below 1e-12 are flagged constant and map to 0.
struct Scaler {
    std::vector<double> mean;
    std::vector<double> stdev;
    std::vector<bool> constant;

    std::size_t dim() const { return mean.size(); }

    void transform_inplace(std::vector<double>& x) const {
        for (std::size_t f = 0; f < x.size(); ++f)
            x[f] = constant[f] ? 0.0 : (x[f] - mean[f]) / stdev[f];
    }

    std::vector<double> transform(std::vector<double> x) const {
        transform_inplace(x);
        return x;
    }

    std::vector<double> inverse(std::vector<double> z) const {
        for (std::size_t f = 0; f < z.size(); ++f)
            z[f] = constant[f] ? mean[f] : z[f] * stdev[f] + mean[f];
        return z;
    }
};

inline Scaler fit_scaler_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw TrainError("fit_scaler: empty training set");
    const std::size_t d = rows.front().size();
    Scaler s;
    s.mean.assign(d, 0.0);
    s.stdev.assign(d, 0.0);
    s.constant.assign(d, false);
    for (const auto& r : rows)
        for (std::size_t f = 0; f < d; ++f) s.mean[f] += r[f];
    for (std::size_t f = 0; f < d; ++f) s.mean[f] /= double(rows.size());
    for (const auto& r : rows)
        for (std::size_t f = 0; f < d; ++f) {
            const double dlt = r[f] - s.mean[f];
            s.stdev[f] += dlt * dlt;
        }
    for (std::size_t f = 0; f < d; ++f) {
        s.stdev[f] = std::sqrt(s.stdev[f] / double(rows.size()));
        if (s.stdev[f] < 1e-12) {
            s.constant[f] = true;
            s.stdev[f] = 0.0;
        }
    }
    return s;
}

inline Scaler fit_scaler(const std::vector<Instance>& train) {
    require_train_only(train, "fit_scaler");
    std::vector<std::vector<double>> rows;
    rows.reserve(train.size());
    for (const auto& inst : train)
        rows.emplace_back(inst.features.begin(), inst.features.end());
    return fit_scaler_rows(rows);
}

inline std::vector<Instance> apply_scaler(const Scaler& scaler,
                                          std::vector<Instance> instances) {
    for (auto& inst : instances) {
        for (std::size_t f = 0; f < std::size_t(kFeatureDim); ++f)
            inst.features[f] = scaler.constant[f]
                                   ? 0.0
                                   : (inst.features[f] - scaler.mean[f]) / scaler.stdev[f];
    }
    return instances;
}

// ----------------------------------------------------------------------------
// Imbalance processing
// ----------------------------------------------------------------------------

enum class OversampleKey { FourClass, Occurrence };

/// Random duplication with replacement until every present class matches the
/// majority count. Originals are all retained, in their input order.
inline std::vector<Instance> oversample(const std::vector<Instance>& train,
                                        std::uint64_t seed,
                                        OversampleKey key = OversampleKey::FourClass) {
    require_train_only(train, "oversample");
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < train.size(); ++i) {
        const int label = key == OversampleKey::FourClass ? int(train[i].label4)
                                                          : int(train[i].occurred);
        groups[label].push_back(i);
    }
    std::size_t majority = 0;
    for (const auto& [label, idx] : groups) majority = std::max(majority, idx.size());

    std::vector<Instance> out(train);
    for (const auto& [label, idx] : groups) {
        Rng rng(derive_stream(seed, 0x0BE5ULL, std::uint64_t(label)));
        for (std::size_t n = idx.size(); n < majority; ++n)
            out.push_back(train[idx[rng.index(idx.size())]]);
    }
    return out;
}

// ----------------------------------------------------------------------------
// Feature selection
// ----------------------------------------------------------------------------

struct FeatureMask {
    std::vector<bool> keep;

    std::size_t count() const {
        return std::size_t(std::count(keep.begin(), keep.end(), true));
    }
    bool all() const { return count() == keep.size(); }

    std::vector<double> apply(const std::vector<double>& x) const {
        if (all()) return x;
        std::vector<double> out;
        out.reserve(count());
        for (std::size_t f = 0; f < x.size(); ++f)
            if (keep[f]) out.push_back(x[f]);
        return out;
    }
};

enum class FeatureSelectMode { None, Variance, Importance };

inline FeatureSelectMode feature_mode_from_name(const std::string& name) {
    if (name == "none") return FeatureSelectMode::None;
    if (name == "variance") return FeatureSelectMode::Variance;
    if (name == "importance") return FeatureSelectMode::Importance;
    throw ConfigError("unknown feature selection mode '" + name + "'");
}

inline FeatureMask select_features(const std::vector<Instance>& train,
                                   FeatureSelectMode mode, double top_fraction = 0.8,
                                   std::uint64_t seed = 0) {
    require_train_only(train, "select_features");
    FeatureMask mask;
    mask.keep.assign(kFeatureDim, true);
    if (mode == FeatureSelectMode::None) return mask;
    if (train.empty()) throw TrainError("select_features: empty training set");

    if (mode == FeatureSelectMode::Variance) {
        const Scaler s = fit_scaler(train);
        for (std::size_t f = 0; f < std::size_t(kFeatureDim); ++f)
            mask.keep[f] = !s.constant[f];
    } else {
        std::vector<std::vector<double>> x;
        std::vector<int> y;
        x.reserve(train.size());
        for (const auto& inst : train) {
            x.emplace_back(inst.features.begin(), inst.features.end());
            y.push_back(int(inst.label4));
        }
        ForestParams params;
        params.seed = seed;
        const Forest forest = fit_forest(x, y, kClassCount, params);
        const auto& imp = forest.feature_importances();
        std::vector<int> order(std::size_t(kFeatureDim));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return imp[std::size_t(a)] > imp[std::size_t(b)];
        });
        const std::size_t keep_n = std::max<std::size_t>(
            1, std::size_t(std::ceil(top_fraction * kFeatureDim)));
        mask.keep.assign(kFeatureDim, false);
        for (std::size_t i = 0; i < keep_n; ++i) mask.keep[std::size_t(order[i])] = true;
    }
    if (mask.count() == 0) throw TrainError("select_features: mask would be empty");
    return mask;
}

// ----------------------------------------------------------------------------
// Instance dump (instances.csv)
// ----------------------------------------------------------------------------

inline std::string instances_csv_header() {
    std::string h = "patient_id,t";
    for (int f = 0; f < kFeatureDim; ++f) h += ",f" + std::to_string(f);
    h += ",label4,occurred";
    return h;
}

inline std::string serialize_instances_csv(const std::vector<Instance>& instances) {
    std::string out = instances_csv_header() + "\n";
    for (const auto& inst : instances) {
        out += inst.patient_id;
        out += ',';
        out += format_iso8601_utc(inst.t);
        for (const double v : inst.features) {
            out += ',';
            out += format_double(v);
        }
        out += ',';
        out += class_name(inst.label4);
        out += inst.occurred ? ",1\n" : ",0\n";
    }
    return out;
}

inline std::vector<Instance> read_instances_csv(const std::filesystem::path& path) {
    CsvReader reader(path, instances_csv_header());
    std::vector<Instance> out;
    while (auto row = reader.next()) {
        if (row->fields.size() != std::size_t(kFeatureDim) + 4)
            reader.fail(row->line_no, "expected " + std::to_string(kFeatureDim + 4) +
                                          " fields, got " + std::to_string(row->fields.size()));
        Instance inst;
        inst.patient_id = row->fields[0];
        const auto t = parse_iso8601(row->fields[1]);
        if (!t) reader.fail(row->line_no, "bad timestamp '" + row->fields[1] + "'");
        inst.t = *t;
        for (int f = 0; f < kFeatureDim; ++f) {
            const auto v = parse_double(row->fields[std::size_t(f) + 2]);
            if (!v) reader.fail(row->line_no, "bad feature value");
            inst.features[std::size_t(f)] = *v;
        }
        const auto cls = class_from_name(row->fields[std::size_t(kFeatureDim) + 2]);
        if (!cls) reader.fail(row->line_no, "bad label4");
        inst.label4 = *cls;
        inst.occurred = row->fields[std::size_t(kFeatureDim) + 3] == "1";
        if (inst.occurred != (inst.label4 != BpsdClass::Normal))
            reader.fail(row->line_no, "occurred flag inconsistent with label4");
        out.push_back(std::move(inst));
    }
    return out;
}

} // namespace bpsd
