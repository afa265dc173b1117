#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "specrec/net.hpp"
#include "specrec/synth.hpp"

namespace specrec {

struct TrainConfig {
    double pretrain_lr = 1e-4;
    int pretrain_steps = 200;
    int batch = 4;
    double alpha = 1e-2;   // single-stack adaptation rate
    double beta = 5e-5;    // outer meta rate
    int n_inner = 5;       // adaptation updates
    int meta_tasks = 4;    // tasks drawn per outer step
    int meta_steps = 30;
    std::uint64_t seed = 0;
    bool cosine = true;    // anneal the pre-training step size to zero

    // alpha may be zero (documented degenerate mode); the other rates must
    // be strictly positive
    void validate() const;
};

// Chronological loss trace. Wall-clock timings stay in memory only, so the
// serialized log is a pure function of (params, corpus, config).
struct TrainLog {
    struct Row {
        int step;
        std::string phase;
        std::string kind;
        double value;
    };
    std::vector<Row> rows;
    std::uint64_t seed = 0;
    std::map<std::string, double> phase_seconds;

    void add(int step, std::string phase, std::string kind, double value);
    bool all_finite() const;
};

// CSV "step,phase,kind,value" with round-trippable doubles.
void save_train_log(const TrainLog& log, const std::string& path);

// Resolves stored illumination labels against an available set; order
// follows the labels. Throws on an unknown label.
std::vector<IlluminationSpectrum> select_illums(const std::vector<std::string>& labels,
                                                const std::vector<IlluminationSpectrum>& available);

// Joint-loss pre-training: adaptive-moment descent on L_Pri + L_Aux over
// shuffled batches, optional cosine step-size annealing. Aborts with the
// step index on a non-finite loss.
TrainLog pretrain(ParamSet& params, const std::vector<Triple>& corpus,
                  const std::vector<IlluminationSpectrum>& illums, const NetConfig& net,
                  const TrainConfig& config);

// Plain gradient descent on the reconstruction loss of one stack, updating
// every partition; the ground truth is never consulted. Logs the loss seen
// before each update when a log is supplied.
ParamSet inner_adapt(const ParamSet& params, const RgbStack& input,
                     const std::vector<IlluminationSpectrum>& illums, const NetConfig& net,
                     double alpha, int steps, TrainLog* log = nullptr, int base_step = 0);

// Meta phase: per task, adapt a copy for n_inner steps, accumulate the
// recovery-loss gradient at the adapted point for the outer update of the
// shared and recovery partitions (summed over the task batch), and nudge the
// original reconstruction head with the adapted-point reconstruction
// gradient. First-order: the inner update is not differentiated through.
TrainLog meta_train(ParamSet& params, const std::vector<Triple>& corpus,
                    const std::vector<IlluminationSpectrum>& illums, const NetConfig& net,
                    const TrainConfig& config);

struct AdaptResult {
    SpectralCube recovered;
    ParamSet params;
    TrainLog log;
};

// n_inner reconstruction-only updates on the single test stack, then one
// forward pass; log rows hold the reconstruction loss before each update and
// after the last.
AdaptResult adapt_test_time(const ParamSet& params, const RgbStack& input,
                            const std::vector<IlluminationSpectrum>& illums, const NetConfig& net,
                            const TrainConfig& config);

}  // namespace specrec
