#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "recam/types.hpp"

namespace recam {

struct PredictionRecord {
    std::string id;
    std::vector<Real> probs;  // original candidate order
    int choice = 0;

    bool operator==(const PredictionRecord&) const = default;
};

struct Predictions {
    std::string model_id;
    std::vector<PredictionRecord> records;

    bool operator==(const Predictions&) const = default;
};

/// Index of the largest entry; ties go to the lowest index.
int argmax_lowest(const std::vector<Real>& values);
int argmax_lowest(const Vector& values);

/// Checks unique ids and per-record normalization (1 +- 1e-6).
void validate_predictions(const Predictions& predictions);

/// JSON-Lines: one {"id", "probs", "choice"} object per line.
void write_predictions(const Predictions& predictions, const std::filesystem::path& path);
std::string serialize_predictions(const Predictions& predictions);
/// model_id defaults to the file stem.
Predictions read_predictions(const std::filesystem::path& path, std::string model_id = {});

}  // namespace recam
