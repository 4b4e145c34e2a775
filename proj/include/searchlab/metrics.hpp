#pragma once

#include <string>
#include <vector>

#include "searchlab/search.hpp"

namespace searchlab {

// Best-so-far trajectory of a run: values[k] is the best validation bpb after
// experiment k+1 (crashed experiments excluded from the minimum). Positions
// before the first kept experiment hold the baseline value, and the curve is
// flat-extended to the declared experiment budget if the log is short.
struct BestSoFarCurve {
    std::vector<double> values;
    std::string run_id;

    double final_value() const { return values.empty() ? 0.0 : values.back(); }
};

BestSoFarCurve best_so_far(const RunLog& log);

// Area under the best-so-far curve: unit-width rectangle sum over the N
// experiment positions. A constant curve of value v over N positions gives
// exactly v * N.
double auc_oc(const BestSoFarCurve& curve);

struct KeepRate {
    int kept = 0;
    int eligible = 0;  // experiments that ran to completion (non-crash, non-rejected)
    double rate = 0.0;
    bool degenerate = false;  // no eligible experiments at all
};

KeepRate keep_rate(const RunLog& log);

// Three-way decomposition of the improvement over the fixed default into a
// hyperparameter contribution and an architecture contribution:
//   total = bpb_fixed - mean(agent)
//   hp    = bpb_fixed - mean(hp_only)
//   arch  = mean(hp_only) - mean(agent)
// so hp + arch == total by construction. Percentages are contribution/total
// * 100 and may exceed 100 or be negative.
struct DecompositionResult {
    std::string track;
    double bpb_fixed = 0.0;
    double mean_hp_only = 0.0;
    double mean_agent = 0.0;
    int n_hp_runs = 0;
    int n_agent_runs = 0;
    double total_improvement = 0.0;
    double hp_contribution = 0.0;
    double arch_contribution = 0.0;
    double hp_pct = 0.0;
    double arch_pct = 0.0;
    bool degenerate = false;  // total improvement is exactly zero
};

DecompositionResult decompose(const std::string& track, double best_fixed,
                              const std::vector<double>& best_hp_runs,
                              const std::vector<double>& best_agent_runs);

// CSV with header: track,total_impr_bpb,hp_pct,arch_pct,n_runs_per_condition
std::string decomposition_csv(const std::vector<DecompositionResult>& rows);

}  // namespace searchlab
