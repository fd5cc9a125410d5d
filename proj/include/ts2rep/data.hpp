#pragma once

// Dataset ingestion, z-score normalization, missing-value handling and
// calendar-feature channels.
//
// File formats:
//   classification TSV: one series per line, "label<TAB>v1<TAB>v2...";
//     the literal NaN (any case) marks a missing value; variable-length
//     collections are padded to a common length with NaNs.
//   forecast/anomaly CSV: header row, first column is the timestamp
//     (ISO-8601 "YYYY-MM-DD[ HH:MM[:SS]]" or integer epoch seconds),
//     remaining columns are variables.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ts2rep/common.hpp"
#include "ts2rep/trainer.hpp"

namespace ts2rep::data {

struct Series {
    int64_t T = 0, F = 0;
    std::vector<double> values;        // row-major T x F, NaN = missing
    std::vector<uint8_t> missing;      // isnan(values), maintained by loaders
    std::optional<int64_t> label;      // classification class id
    std::vector<int64_t> timestamps;   // epoch seconds; empty when unavailable

    void rebuild_missing_mask();
};

enum class Freq { minutely, hourly, other };

const char* freq_name(Freq f);

/// Per-variable normalization statistics, always computed from the training
/// split only.
struct NormStats {
    std::vector<double> mean, stddev;
    std::vector<uint8_t> zero_variance;
};

struct Dataset {
    std::vector<Series> train, val, test;
    NormStats stats;
    Freq freq = Freq::other;
    bool normalized = false;
    std::vector<std::string> columns;  // variable names for table datasets
};

/// Train/val/test split. Fractions by row count, or calendar months when
/// `monthly` is set (12/4/4-style).
struct SplitSpec {
    double train = 0.6;
    double val = 0.2;
    bool monthly = false;
    int64_t train_months = 12, val_months = 4, test_months = 4;
};

Dataset load_classification_tsv(const std::string& path);

/// Parse a CSV table. Empty target_column keeps all variables (multivariate);
/// otherwise only the named column is kept.
Dataset load_forecast_csv(const std::string& path, const std::string& target_column = "",
                          const SplitSpec& split = {});

/// Zero mean, unit variance per variable using population statistics of the
/// training split; NaNs are ignored in statistics and preserved in output.
/// Zero-variance variables are centered only (with a warning on stderr).
void zscore_normalize(Dataset& ds);

/// Append the seven calendar channels (minute, hour, day-of-week,
/// day-of-month, day-of-year, month-of-year, week-of-year), each scaled to
/// [-0.5, 0.5]. Refused for datasets without timestamps.
void add_time_features(Dataset& ds);

std::string serialize_classification_tsv(const std::vector<Series>& series);
std::string serialize_forecast_csv(const Series& series, const std::vector<std::string>& columns);

uint64_t file_fingerprint(const std::string& path);

/// Strip labels for the trainer; training code never sees them.
std::vector<train::UnlabeledSeries> unlabeled(const std::vector<Series>& series);

// Timestamp helpers (UTC, no leap seconds).
struct CivilTime {
    int64_t year;
    int month, day, hour, minute, second;
    int day_of_week;  // 0 = Monday
    int day_of_year;  // 1-based
};
CivilTime civil_from_epoch(int64_t epoch_seconds);
int64_t epoch_from_civil(int64_t year, int month, int day, int hour = 0, int minute = 0, int second = 0);
int64_t parse_timestamp(const std::string& text);

}  // namespace ts2rep::data
