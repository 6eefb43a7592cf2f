#pragma once

#include <string>
#include <vector>

#include "admix/attacks.hpp"
#include "admix/dataset.hpp"

namespace admix {

struct ReportRow {
    std::string surrogate;
    std::string target;
    std::string attack;
    int n = 0;
    float success_rate = 0.0f;  // successes / n exactly
    bool is_whitebox = false;
};

struct RunConfig {
    std::vector<std::string> surrogate_paths;  // >1 means equal-weight ensemble
    std::vector<std::string> target_paths;
    std::string dataset_path;
    std::string attack_name = "admix";
    AttackConfig attack;  // attack.seed is the global seed
    bool restrict_to_correct = false;
    size_t image_count = 0;  // 0 = every record in the dataset
};

struct EvalResult {
    std::vector<ReportRow> rows;
    std::vector<Tensor> adversaries;  // index-aligned with the evaluated records
    std::vector<int> labels;
    float max_linf = 0.0f;
    size_t whitebox_successes = 0;  // against the surrogate ensemble itself
    size_t n_images = 0;
};

// Maps a CLI attack name onto the iterated-attack configuration
// (fgsm: T=1, alpha=eps, mu=0; ifgsm: mu=0; otherwise the named transform).
AttackConfig resolve_attack(const std::string& name, AttackConfig base);

// Display name including composition suffixes, e.g. "admix-ti-dim".
std::string composed_attack_name(const std::string& name, const AttackConfig& cfg);

// Crafts one adversary per record on the surrogate ensemble and scores
// every target. Per-image rng streams derive from (seed, index), so
// serial and pooled runs agree bit-exactly; ADMIX_THREADS caps the pool.
EvalResult evaluate_attack(const RunConfig& run);

enum class SweepAxis { M2, Eta };

// One evaluate_attack per axis value with a shared seed. The value-0
// point runs the dedicated SIM path (the admix degenerate form).
std::vector<ReportRow> sweep_ablation(const RunConfig& run, SweepAxis axis,
                                      const std::vector<float>& values);

void write_report(const std::vector<ReportRow>& rows, const std::string& format,
                  const std::string& path);
std::vector<ReportRow> read_report(const std::string& format, const std::string& path);

}  // namespace admix
