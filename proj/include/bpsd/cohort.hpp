// ============================================================================
// cohort.hpp - patient/signal/event data model, CSV ingestion, grid alignment
// ============================================================================
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bpsd/common.hpp"
#include "bpsd/csv.hpp"
#include "bpsd/time.hpp"

namespace bpsd {

// ----------------------------------------------------------------------------
// Domain types
// ----------------------------------------------------------------------------

enum class Sex : int { Female = 0, Male = 1 };

struct Demographics {
    int age = 0;
    Sex sex = Sex::Female;
    int education_years = 0;

    bool operator==(const Demographics&) const = default;
};

/// The 11 wearable signals in their fixed canonical order. The numeric value
/// of each enumerator is the signal's feature index within a grid cell.
enum class SignalType : int {
    HR = 0,
    HRV,
    SYS,
    DIA,
    Stress,
    Temp,
    Oxygen,
    Steps,
    Calories,
    TossTurn,
    SleepQuality,
};

inline constexpr int kSignalCount = 11;

inline const std::array<std::string_view, kSignalCount>& signal_names() {
    static const std::array<std::string_view, kSignalCount> names = {
        "HR",    "HRV",      "SYS",      "DIA",      "Stress", "Temp",
        "Oxygen", "Steps",    "Calories", "TossTurn", "SleepQuality"};
    return names;
}

inline std::optional<SignalType> signal_from_name(std::string_view name) {
    const auto& names = signal_names();
    for (int i = 0; i < kSignalCount; ++i)
        if (names[std::size_t(i)] == name) return SignalType(i);
    return std::nullopt;
}

inline bool is_sleep_signal(SignalType s) {
    return s == SignalType::TossTurn || s == SignalType::SleepQuality;
}

enum class BpsdClass : int {
    Normal = 0,
    Hyperactivity = 1,
    Psychosis = 2,
    PhysicalBehavior = 3,
};

inline constexpr int kClassCount = 4;
inline constexpr int kAbnormalClassCount = 3;

inline std::string_view class_name(BpsdClass c) {
    switch (c) {
        case BpsdClass::Normal: return "Normal";
        case BpsdClass::Hyperactivity: return "Hyperactivity";
        case BpsdClass::Psychosis: return "Psychosis";
        case BpsdClass::PhysicalBehavior: return "PhysicalBehavior";
    }
    return "?";
}

inline std::optional<BpsdClass> class_from_name(std::string_view name) {
    for (int i = 0; i < kClassCount; ++i)
        if (class_name(BpsdClass(i)) == name) return BpsdClass(i);
    return std::nullopt;
}

/// Tie-break priority: Hyperactivity > Psychosis > PhysicalBehavior > Normal.
/// Lower rank wins.
inline int class_priority_rank(BpsdClass c) {
    switch (c) {
        case BpsdClass::Hyperactivity: return 0;
        case BpsdClass::Psychosis: return 1;
        case BpsdClass::PhysicalBehavior: return 2;
        case BpsdClass::Normal: return 3;
    }
    return 4;
}

struct SignalSample {
    Instant timestamp = 0;
    SignalType signal = SignalType::HR;
    double value = 0.0;

    bool operator==(const SignalSample&) const = default;
};

struct BpsdEvent {
    Instant timestamp = 0;
    BpsdClass bpsd_class = BpsdClass::Psychosis; // never Normal

    bool operator==(const BpsdEvent&) const = default;
};

struct PatientRecord {
    std::string patient_id;
    Demographics demographics;
    std::vector<SignalSample> samples; // sorted by (timestamp, signal)
    std::vector<BpsdEvent> events;     // sorted by timestamp

    bool operator==(const PatientRecord&) const = default;
};

struct Cohort {
    std::vector<PatientRecord> patients; // sorted by patient_id

    bool operator==(const Cohort&) const = default;

    const PatientRecord* find(std::string_view id) const {
        for (const auto& p : patients)
            if (p.patient_id == id) return &p;
        return nullptr;
    }
};

/// 15-minute grid of aligned signal vectors. Slot k covers
/// [grid_start + 15k min, grid_start + 15(k+1) min). A cell is present only
/// when all 11 signals resolved for that slot.
struct SignalGrid {
    std::string patient_id;
    Instant grid_start = 0; // aligned to a 15-minute boundary
    std::vector<std::optional<std::array<double, kSignalCount>>> cells;

    Instant slot_start(std::size_t k) const {
        return grid_start + Instant(k) * kSlotSeconds;
    }

    std::size_t present_count() const {
        std::size_t n = 0;
        for (const auto& c : cells) n += c.has_value();
        return n;
    }
};

/// Cohort-level sleep-variable medians, the last-resort fill for patients
/// who never recorded a sleep value.
struct SleepFallback {
    std::optional<double> toss_turn;
    std::optional<double> sleep_quality;
};

// ----------------------------------------------------------------------------
// CSV schemas
// ----------------------------------------------------------------------------

inline constexpr std::string_view kSignalsHeader = "patient_id,timestamp,signal,value";
inline constexpr std::string_view kEventsHeader = "patient_id,timestamp,bpsd_class";
inline constexpr std::string_view kDemographicsHeader = "patient_id,age,sex,education_years";

inline void sort_patient_record(PatientRecord& p) {
    std::sort(p.samples.begin(), p.samples.end(), [](const auto& a, const auto& b) {
        if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
        return int(a.signal) < int(b.signal);
    });
    std::stable_sort(p.events.begin(), p.events.end(),
                     [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
}

inline Cohort load_cohort(const std::filesystem::path& signals_path,
                          const std::filesystem::path& events_path,
                          const std::filesystem::path& demographics_path) {
    Cohort cohort;
    std::map<std::string, std::size_t> by_id;

    {
        CsvReader demo(demographics_path, kDemographicsHeader);
        while (auto row = demo.next()) {
            if (row->fields.size() != 4)
                demo.fail(row->line_no, "expected 4 fields, got " +
                                            std::to_string(row->fields.size()));
            PatientRecord rec;
            rec.patient_id = row->fields[0];
            if (rec.patient_id.empty()) demo.fail(row->line_no, "empty patient_id");
            if (by_id.count(rec.patient_id))
                demo.fail(row->line_no, "duplicate patient_id '" + rec.patient_id + "'");
            const auto age = parse_int(row->fields[1]);
            if (!age || *age < 0 || *age > 130)
                demo.fail(row->line_no, "age out of range [0,130]: '" + row->fields[1] + "'");
            if (row->fields[2] == "F")
                rec.demographics.sex = Sex::Female;
            else if (row->fields[2] == "M")
                rec.demographics.sex = Sex::Male;
            else
                demo.fail(row->line_no, "sex must be F or M, got '" + row->fields[2] + "'");
            const auto edu = parse_int(row->fields[3]);
            if (!edu || *edu < 0 || *edu > 30)
                demo.fail(row->line_no,
                          "education_years out of range [0,30]: '" + row->fields[3] + "'");
            rec.demographics.age = int(*age);
            rec.demographics.education_years = int(*edu);
            by_id.emplace(rec.patient_id, cohort.patients.size());
            cohort.patients.push_back(std::move(rec));
        }
    }

    {
        CsvReader sig(signals_path, kSignalsHeader);
        while (auto row = sig.next()) {
            if (row->fields.size() != 4)
                sig.fail(row->line_no, "expected 4 fields, got " +
                                           std::to_string(row->fields.size()));
            const auto it = by_id.find(row->fields[0]);
            if (it == by_id.end())
                sig.fail(row->line_no, "unknown patient_id '" + row->fields[0] + "'");
            const auto ts = parse_iso8601(row->fields[1]);
            if (!ts) sig.fail(row->line_no, "bad timestamp '" + row->fields[1] + "'");
            const auto signal = signal_from_name(row->fields[2]);
            if (!signal) sig.fail(row->line_no, "unknown signal name '" + row->fields[2] + "'");
            const auto value = parse_double(row->fields[3]);
            if (!value || !std::isfinite(*value))
                sig.fail(row->line_no, "bad value '" + row->fields[3] + "'");
            cohort.patients[it->second].samples.push_back(SignalSample{*ts, *signal, *value});
        }
    }

    {
        CsvReader evt(events_path, kEventsHeader);
        while (auto row = evt.next()) {
            if (row->fields.size() != 3)
                evt.fail(row->line_no, "expected 3 fields, got " +
                                           std::to_string(row->fields.size()));
            const auto it = by_id.find(row->fields[0]);
            if (it == by_id.end())
                evt.fail(row->line_no, "unknown patient_id '" + row->fields[0] + "'");
            const auto ts = parse_iso8601(row->fields[1]);
            if (!ts) evt.fail(row->line_no, "bad timestamp '" + row->fields[1] + "'");
            const auto cls = class_from_name(row->fields[2]);
            if (!cls || *cls == BpsdClass::Normal)
                evt.fail(row->line_no, "bpsd_class must be one of "
                                       "{Hyperactivity,Psychosis,PhysicalBehavior}, got '" +
                                           row->fields[2] + "'");
            cohort.patients[it->second].events.push_back(BpsdEvent{*ts, *cls});
        }
    }

    for (auto& p : cohort.patients) sort_patient_record(p);
    std::sort(cohort.patients.begin(), cohort.patients.end(),
              [](const auto& a, const auto& b) { return a.patient_id < b.patient_id; });
    return cohort;
}

// ----------------------------------------------------------------------------
// Grid alignment
// ----------------------------------------------------------------------------

namespace detail {

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace detail

/// Assigns samples to 15-minute slots (floor semantics, same-slot duplicates
/// averaged). Sleep variables are day-resolution: the day's mean is broadcast
/// to every slot of that day; days without a value fall back to the patient's
/// median across days, then to `fallback`. A cell is present only when all 11
/// signals resolve.
inline SignalGrid align_to_grid(const PatientRecord& record,
                                const SleepFallback& fallback = {}) {
    SignalGrid grid;
    grid.patient_id = record.patient_id;
    if (record.samples.empty()) return grid;

    Instant min_ts = record.samples.front().timestamp;
    Instant max_ts = record.samples.front().timestamp;
    for (const auto& s : record.samples) {
        min_ts = std::min(min_ts, s.timestamp);
        max_ts = std::max(max_ts, s.timestamp);
    }
    grid.grid_start = floor_to_slot(min_ts);
    const std::size_t n_slots =
        std::size_t((floor_to_slot(max_ts) - grid.grid_start) / kSlotSeconds) + 1;

    // slot-local accumulation for non-sleep signals
    std::vector<std::array<double, kSignalCount>> sums(
        n_slots, std::array<double, kSignalCount>{});
    std::vector<std::array<int, kSignalCount>> counts(n_slots,
                                                      std::array<int, kSignalCount>{});
    // day-level accumulation for sleep signals: day -> (sum, count) per signal
    std::map<Instant, std::array<std::pair<double, int>, kSignalCount>> day_acc;

    for (const auto& s : record.samples) {
        const int si = int(s.signal);
        if (is_sleep_signal(s.signal)) {
            auto& acc = day_acc[floor_to_day(s.timestamp)][std::size_t(si)];
            acc.first += s.value;
            acc.second += 1;
        } else {
            const std::size_t slot =
                std::size_t((floor_to_slot(s.timestamp) - grid.grid_start) / kSlotSeconds);
            sums[slot][std::size_t(si)] += s.value;
            counts[slot][std::size_t(si)] += 1;
        }
    }

    // Per-day sleep values with median fallback across the patient's days.
    std::array<std::map<Instant, double>, kSignalCount> day_value;
    std::array<std::optional<double>, kSignalCount> patient_median;
    for (const SignalType sig : {SignalType::TossTurn, SignalType::SleepQuality}) {
        const std::size_t si = std::size_t(int(sig));
        std::vector<double> values;
        for (const auto& [day, acc] : day_acc) {
            if (acc[si].second > 0) {
                const double v = acc[si].first / acc[si].second;
                day_value[si][day] = v;
                values.push_back(v);
            }
        }
        if (!values.empty()) patient_median[si] = detail::median(std::move(values));
    }
    const std::array<std::optional<double>, 2> last_resort = {fallback.toss_turn,
                                                              fallback.sleep_quality};

    grid.cells.resize(n_slots);
    for (std::size_t k = 0; k < n_slots; ++k) {
        std::array<double, kSignalCount> cell{};
        bool complete = true;
        for (int si = 0; si < kSignalCount && complete; ++si) {
            const auto sig = SignalType(si);
            if (is_sleep_signal(sig)) {
                const Instant day = floor_to_day(grid.slot_start(k));
                const auto& dv = day_value[std::size_t(si)];
                if (const auto it = dv.find(day); it != dv.end())
                    cell[std::size_t(si)] = it->second;
                else if (patient_median[std::size_t(si)])
                    cell[std::size_t(si)] = *patient_median[std::size_t(si)];
                else if (last_resort[std::size_t(si) - std::size_t(SignalType::TossTurn)])
                    cell[std::size_t(si)] =
                        *last_resort[std::size_t(si) - std::size_t(SignalType::TossTurn)];
                else
                    complete = false;
            } else {
                if (counts[k][std::size_t(si)] > 0)
                    cell[std::size_t(si)] =
                        sums[k][std::size_t(si)] / counts[k][std::size_t(si)];
                else
                    complete = false;
            }
        }
        if (complete) grid.cells[k] = cell;
    }
    return grid;
}

/// Cohort-wide sleep medians over per-patient-day values.
inline SleepFallback population_sleep_medians(const Cohort& cohort) {
    std::array<std::vector<double>, 2> pooled;
    for (const auto& p : cohort.patients) {
        std::map<Instant, std::array<std::pair<double, int>, 2>> day_acc;
        for (const auto& s : p.samples) {
            if (!is_sleep_signal(s.signal)) continue;
            const std::size_t j = std::size_t(int(s.signal) - int(SignalType::TossTurn));
            auto& acc = day_acc[floor_to_day(s.timestamp)][j];
            acc.first += s.value;
            acc.second += 1;
        }
        for (const auto& [day, acc] : day_acc)
            for (std::size_t j = 0; j < 2; ++j)
                if (acc[j].second > 0) pooled[j].push_back(acc[j].first / acc[j].second);
    }
    SleepFallback fb;
    if (!pooled[0].empty()) fb.toss_turn = detail::median(std::move(pooled[0]));
    if (!pooled[1].empty()) fb.sleep_quality = detail::median(std::move(pooled[1]));
    return fb;
}

} // namespace bpsd
