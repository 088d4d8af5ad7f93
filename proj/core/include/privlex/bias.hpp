#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "privlex/lrmodel.hpp"

namespace privlex::bias {

/// A model's weights divided by their largest magnitude; all-zero models stay zero.
struct BiasProfile {
    std::string dataset_tag;
    std::vector<std::string> concept_ids;
    std::vector<double> scaled;
    std::string vocab_hash;
};

BiasProfile scale_weights(const SparseLinearModel& model);

enum class Agreement { BothPrivate, BothPublic, Conflicting, ZeroSomewhere };

std::string_view to_string(Agreement a) noexcept;

/// Any zero -> ZeroSomewhere; all positive -> BothPrivate; all negative -> BothPublic;
/// otherwise Conflicting.
Agreement classify(const std::vector<double>& scaled_values) noexcept;

struct ComparisonRow {
    std::string concept_id;
    std::vector<double> scaled;  // one per profile, in profile order
    Agreement agreement = Agreement::ZeroSomewhere;
    double max_magnitude = 0.0;
};

struct Comparison {
    std::vector<std::string> dataset_tags;
    std::vector<ComparisonRow> rows;  // by max magnitude descending, ties by vocabulary order
};

/// Profiles must come from the same vocabulary (same hash when known, same concept order).
Comparison compare(const std::vector<BiasProfile>& profiles);

std::string to_csv(const Comparison& cmp);
/// Horizontal grouped bar chart of scaled weights, one bar per dataset per concept.
std::string to_svg(const Comparison& cmp, std::size_t max_concepts = 40);

}  // namespace privlex::bias
