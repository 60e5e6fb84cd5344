#pragma once
// Relation label -> cause-effect weight mapping.

#include <map>
#include <string>
#include <string_view>

#include "causalrag/error.hpp"

namespace causalrag {

class CausalityTable {
public:
    CausalityTable(std::map<std::string, double, std::less<>> weights, double default_weight)
        : weights_(std::move(weights)), default_weight_(default_weight) {
        if (weights_.empty()) throw ValidationError("causality table is empty");
        check_range("default_weight", default_weight_);
        for (const auto& [label, w] : weights_) {
            if (label.empty()) throw ValidationError("causality table has an empty predicate label");
            check_range(label, w);
        }
    }

    // Listed predicates map to their weight, everything else to the default.
    double weight(std::string_view predicate) const {
        auto it = weights_.find(predicate);
        return it == weights_.end() ? default_weight_ : it->second;
    }

    double default_weight() const { return default_weight_; }
    const std::map<std::string, double, std::less<>>& weights() const { return weights_; }

    friend bool operator==(const CausalityTable&, const CausalityTable&) = default;

private:
    static void check_range(const std::string& what, double w) {
        if (!(w >= 0.0 && w <= 1.0))
            throw ValidationError("causality weight for " + what + " outside [0,1]: " +
                                  std::to_string(w));
    }

    std::map<std::string, double, std::less<>> weights_;
    double default_weight_;
};

inline constexpr double kDefaultTheta = 0.5;

inline CausalityTable default_causality_table() {
    return CausalityTable({{"CAUSES", 0.9},
                           {"PREDISPOSES", 0.8},
                           {"PREVENTS", 0.8},
                           {"TREATS", 0.7},
                           {"MANIFESTATION_OF", 0.7},
                           {"AFFECTS", 0.6},
                           {"ASSOCIATED_WITH", 0.2},
                           {"COEXISTS_WITH", 0.15}},
                          0.05);
}

inline double causality_weight(const CausalityTable& table, std::string_view predicate) {
    return table.weight(predicate);
}

}  // namespace causalrag
