#pragma once

// Published per-run results for the three tracks under the four conditions,
// frozen here as test fixtures: area under the optimization curve (AUC-OC)
// and final validation bits-per-byte per run, plus the decomposition and
// effect-size values the analysis stage must reproduce from them.

#include <vector>

namespace fixtures {

struct TrackFixture {
    const char* name;
    std::vector<double> agent_auc;
    std::vector<double> agent_bpb;
    std::vector<double> hp_auc;
    std::vector<double> hp_bpb;
    std::vector<double> nas_auc;
    std::vector<double> nas_bpb;
    double fixed_auc;
    double fixed_bpb;
    // Expected decomposition of the improvement over the fixed default.
    double expect_total_bpb;
    double expect_hp_pct;
    double expect_arch_pct;
};

inline const TrackFixture& smiles() {
    static const TrackFixture f{
        "smiles",
        {59.31, 58.54, 58.80, 59.17, 59.15},
        {0.5918, 0.5808, 0.5839, 0.5892, 0.5834},
        {58.20, 58.14, 58.22},
        {0.5807, 0.5801, 0.5810},
        {59.45, 59.40, 59.34},
        {0.5906, 0.5923, 0.5914},
        59.61,
        0.5961,
        0.01028,
        150.78,
        -50.78,
    };
    return f;
}

inline const TrackFixture& protein() {
    static const TrackFixture f{
        "protein",
        {396.86, 396.94, 396.88},
        {3.9656, 3.9684, 3.9666},
        {397.67, 397.07, 396.88},
        {3.9901, 3.9699, 3.9684},
        {397.32, 397.20, 397.06},
        {3.9719, 3.9710, 3.9693},
        397.67,
        3.9767,
        0.009833,
        5.76,
        94.24,
    };
    return f;
}

inline const TrackFixture& nlp() {
    static const TrackFixture f{
        "nlp",
        {112.78, 113.81, 112.73, 112.97, 113.71},
        {1.1188, 1.1277, 1.1151, 1.1212, 1.1314},
        {114.75, 114.90, 114.89},
        {1.1462, 1.1470, 1.1477},
        {113.18, 113.32, 113.48},
        {1.1297, 1.1301, 1.1306},
        115.28,
        1.1528,
        0.02996,
        19.47,
        80.53,
    };
    return f;
}

inline std::vector<const TrackFixture*> all_tracks() {
    return {&smiles(), &protein(), &nlp()};
}

// Cohen's d (average-variance form) of the NLP agent-vs-HP-only AUC-OC gap.
inline double nlp_agent_vs_hp_auc_cohens_d() { return -4.4196; }

}  // namespace fixtures
