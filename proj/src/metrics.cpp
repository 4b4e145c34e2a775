#include "searchlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "searchlab/util.hpp"

namespace searchlab {

BestSoFarCurve best_so_far(const RunLog& log) {
    BestSoFarCurve curve;
    curve.run_id = log.run_id;
    std::size_t n = std::max<std::size_t>(std::size_t(std::max(log.n_experiments, 0)),
                                          log.records.size());
    curve.values.reserve(n);
    double running = log.baseline_val_bpb;
    for (const ExperimentRecord& rec : log.records) {
        if (!rec.crashed && rec.val_bpb) running = std::min(running, *rec.val_bpb);
        curve.values.push_back(running);
    }
    while (curve.values.size() < n) curve.values.push_back(running);
    return curve;
}

double auc_oc(const BestSoFarCurve& curve) {
    double sum = 0.0;
    for (double v : curve.values) sum += v;
    return sum;
}

KeepRate keep_rate(const RunLog& log) {
    KeepRate kr;
    for (const ExperimentRecord& rec : log.records) {
        if (rec.crashed) continue;
        ++kr.eligible;
        if (rec.kept) ++kr.kept;
    }
    if (kr.eligible == 0) {
        kr.degenerate = true;
        kr.rate = 0.0;
    } else {
        kr.rate = double(kr.kept) / double(kr.eligible);
    }
    return kr;
}

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / double(v.size());
}

}  // namespace

DecompositionResult decompose(const std::string& track, double best_fixed,
                              const std::vector<double>& best_hp_runs,
                              const std::vector<double>& best_agent_runs) {
    if (best_hp_runs.empty() || best_agent_runs.empty())
        throw config_error("decompose requires at least one run per condition");
    DecompositionResult r;
    r.track = track;
    r.bpb_fixed = best_fixed;
    r.mean_hp_only = mean_of(best_hp_runs);
    r.mean_agent = mean_of(best_agent_runs);
    r.n_hp_runs = int(best_hp_runs.size());
    r.n_agent_runs = int(best_agent_runs.size());
    r.total_improvement = r.bpb_fixed - r.mean_agent;
    r.hp_contribution = r.bpb_fixed - r.mean_hp_only;
    r.arch_contribution = r.mean_hp_only - r.mean_agent;
    if (r.total_improvement == 0.0) {
        r.degenerate = true;
        r.hp_pct = 0.0;
        r.arch_pct = 0.0;
    } else {
        r.hp_pct = r.hp_contribution / r.total_improvement * 100.0;
        r.arch_pct = r.arch_contribution / r.total_improvement * 100.0;
    }
    return r;
}

std::string decomposition_csv(const std::vector<DecompositionResult>& rows) {
    std::ostringstream out;
    out << "track,total_impr_bpb,hp_pct,arch_pct,n_runs_per_condition\n";
    for (const DecompositionResult& r : rows) {
        out << r.track << "," << format_double(r.total_improvement) << ","
            << format_double(r.hp_pct) << "," << format_double(r.arch_pct) << ","
            << "hp=" << r.n_hp_runs << ";agent=" << r.n_agent_runs << "\n";
    }
    return out.str();
}

}  // namespace searchlab
