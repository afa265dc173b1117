#include "specrec/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "specrec/rng.hpp"

namespace specrec {
namespace {

class PhaseTimer {
  public:
    PhaseTimer(TrainLog& log, std::string phase) : log_(log), phase_(std::move(phase)), start_(clock::now()) {}
    ~PhaseTimer() {
        log_.phase_seconds[phase_] += std::chrono::duration<double>(clock::now() - start_).count();
    }

  private:
    using clock = std::chrono::steady_clock;
    TrainLog& log_;
    std::string phase_;
    clock::time_point start_;
};

void require_finite(double loss, const char* phase, int step) {
    if (!std::isfinite(loss)) {
        throw std::runtime_error(std::string(phase) + ": non-finite loss at step " + std::to_string(step));
    }
}

void accumulate(GradMap& acc, const GradMap& grads) {
    if (acc.empty()) {
        acc = grads;
        return;
    }
    for (auto& [name, g] : acc) {
        const Tensor& add = grads.at(name);
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += add[i];
    }
}

void scale_grads(GradMap& grads, double factor) {
    for (auto& [name, g] : grads) {
        for (double& v : g.data) v *= factor;
    }
}

// first/second-moment adaptive descent with bias correction
class Adam {
  public:
    explicit Adam(const ParamSet& params) {
        for (const auto& e : params.entries) {
            m_[e.name] = Tensor::zeros(e.value.shape);
            v_[e.name] = Tensor::zeros(e.value.shape);
        }
    }

    void step(ParamSet& params, const GradMap& grads, double lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(kBeta1, t_);
        const double c2 = 1.0 - std::pow(kBeta2, t_);
        for (auto& e : params.entries) {
            const Tensor& g = grads.at(e.name);
            Tensor& m = m_.at(e.name);
            Tensor& v = v_.at(e.name);
            for (std::size_t i = 0; i < g.numel(); ++i) {
                m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
                v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
                e.value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
            }
        }
    }

  private:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    std::map<std::string, Tensor> m_, v_;
    int t_ = 0;
};

// deterministic epoch-style batch sampler: walks a shuffled permutation,
// reshuffling whenever it runs dry
class BatchSampler {
  public:
    BatchSampler(std::size_t n, Rng& rng) : order_(n), rng_(rng) {
        for (std::size_t i = 0; i < n; ++i) order_[i] = i;
        rng_.shuffle(order_);
    }

    std::vector<std::size_t> next(int batch) {
        std::vector<std::size_t> out;
        out.reserve(static_cast<std::size_t>(batch));
        for (int i = 0; i < batch; ++i) {
            if (cursor_ == order_.size()) {
                rng_.shuffle(order_);
                cursor_ = 0;
            }
            out.push_back(order_[cursor_++]);
        }
        return out;
    }

  private:
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    Rng& rng_;
};

struct SampleLosses {
    double primary = 0.0;
    double auxiliary = 0.0;
};

// one forward/backward on L_Pri + L_Aux; grads summed into acc
SampleLosses joint_backward(const ParamSet& params, const Triple& triple,
                            const std::vector<IlluminationSpectrum>& available, const NetConfig& net,
                            GradMap& acc) {
    const auto illums = select_illums(triple.illum_labels, available);
    ForwardTrace trace = forward(params, triple.input, illums, net);
    Node* lp = loss_primary_node(trace, triple.truth, triple.css);
    Node* la = loss_auxiliary_node(trace, triple.input);
    Node* total = trace.graph->add(lp, la);
    accumulate(acc, backward_gradients(trace, total));
    return {lp->value[0], la->value[0]};
}

void sgd_step(ParamSet& params, const GradMap& grads, double lr, Partition only, bool restrict_partition) {
    for (auto& e : params.entries) {
        if (restrict_partition && e.part != only) continue;
        const Tensor& g = grads.at(e.name);
        for (std::size_t i = 0; i < g.numel(); ++i) e.value[i] -= lr * g[i];
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (!(pretrain_lr > 0.0)) throw std::invalid_argument("TrainConfig: pretrain_lr must be > 0");
    if (!(beta > 0.0)) throw std::invalid_argument("TrainConfig: beta must be > 0");
    if (alpha < 0.0) throw std::invalid_argument("TrainConfig: alpha must be >= 0");
    if (pretrain_steps < 0 || meta_steps < 0) throw std::invalid_argument("TrainConfig: step counts must be >= 0");
    if (batch < 1 || meta_tasks < 1) throw std::invalid_argument("TrainConfig: batch sizes must be >= 1");
    if (n_inner < 0) throw std::invalid_argument("TrainConfig: n_inner must be >= 0");
}

void TrainLog::add(int step, std::string phase, std::string kind, double value) {
    rows.push_back({step, std::move(phase), std::move(kind), value});
}

bool TrainLog::all_finite() const {
    for (const Row& r : rows) {
        if (!std::isfinite(r.value)) return false;
    }
    return true;
}

void save_train_log(const TrainLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_train_log: cannot open " + path);
    out << "step,phase,kind,value\n";
    char buf[48];
    for (const TrainLog::Row& r : log.rows) {
        std::snprintf(buf, sizeof buf, "%.17g", r.value);
        out << r.step << ',' << r.phase << ',' << r.kind << ',' << buf << '\n';
    }
    if (!out) throw std::runtime_error("save_train_log: write failed for " + path);
}

std::vector<IlluminationSpectrum> select_illums(const std::vector<std::string>& labels,
                                                const std::vector<IlluminationSpectrum>& available) {
    std::vector<IlluminationSpectrum> out;
    out.reserve(labels.size());
    for (const std::string& label : labels) {
        bool found = false;
        for (const IlluminationSpectrum& s : available) {
            if (s.label == label) {
                out.push_back(s);
                found = true;
                break;
            }
        }
        if (!found) throw std::invalid_argument("select_illums: unknown illumination label " + label);
    }
    return out;
}

TrainLog pretrain(ParamSet& params, const std::vector<Triple>& corpus,
                  const std::vector<IlluminationSpectrum>& illums, const NetConfig& net,
                  const TrainConfig& config) {
    config.validate();
    if (corpus.empty()) throw std::invalid_argument("pretrain: empty corpus");

    TrainLog log;
    log.seed = config.seed;
    PhaseTimer timer(log, "pretrain");
    Rng rng(config.seed);
    BatchSampler sampler(corpus.size(), rng);
    Adam opt(params);

    for (int step = 0; step < config.pretrain_steps; ++step) {
        GradMap acc;
        double pri = 0.0, aux = 0.0;
        for (std::size_t idx : sampler.next(config.batch)) {
            const SampleLosses l = joint_backward(params, corpus[idx], illums, net, acc);
            pri += l.primary;
            aux += l.auxiliary;
        }
        const double inv = 1.0 / config.batch;
        pri *= inv;
        aux *= inv;
        require_finite(pri + aux, "pretrain", step);
        scale_grads(acc, inv);

        double lr = config.pretrain_lr;
        if (config.cosine && config.pretrain_steps > 1) {
            lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * step / (config.pretrain_steps - 1)));
        }
        opt.step(params, acc, lr);
        if (!params.all_finite()) {
            throw std::runtime_error("pretrain: non-finite parameters at step " + std::to_string(step));
        }

        log.add(step, "pretrain", "L_Pre", pri + aux);
        log.add(step, "pretrain", "L_Pri", pri);
        log.add(step, "pretrain", "L_Aux", aux);
    }
    return log;
}

ParamSet inner_adapt(const ParamSet& params, const RgbStack& input,
                     const std::vector<IlluminationSpectrum>& illums, const NetConfig& net,
                     double alpha, int steps, TrainLog* log, int base_step) {
    if (steps < 0) throw std::invalid_argument("inner_adapt: steps must be >= 0");
    ParamSet adapted = params;
    for (int step = 0; step < steps; ++step) {
        ForwardTrace trace = forward(adapted, input, illums, net);
        Node* la = loss_auxiliary_node(trace, input);
        require_finite(la->value[0], "inner_adapt", step);
        if (log) log->add(base_step + step, "adapt", "L_Aux", la->value[0]);
        const GradMap grads = backward_gradients(trace, la);
        sgd_step(adapted, grads, alpha, Partition::shared, false);  // every partition moves
        if (!adapted.all_finite()) {
            throw std::runtime_error("inner_adapt: non-finite parameters at step " + std::to_string(step));
        }
    }
    return adapted;
}

TrainLog meta_train(ParamSet& params, const std::vector<Triple>& corpus,
                    const std::vector<IlluminationSpectrum>& illums, const NetConfig& net,
                    const TrainConfig& config) {
    config.validate();
    if (corpus.empty()) throw std::invalid_argument("meta_train: empty corpus");

    TrainLog log;
    log.seed = config.seed;
    PhaseTimer timer(log, "meta_train");
    Rng rng(config.seed);
    BatchSampler sampler(corpus.size(), rng);

    for (int step = 0; step < config.meta_steps; ++step) {
        GradMap outer_acc;
        double pri = 0.0, aux = 0.0;
        for (std::size_t idx : sampler.next(config.meta_tasks)) {
            const Triple& task = corpus[idx];
            const auto task_illums = select_illums(task.illum_labels, illums);
            const ParamSet theta_k = inner_adapt(params, task.input, task_illums, net, config.alpha, config.n_inner);

            // recovery gradient at the adapted point drives the outer update
            ForwardTrace tp = forward(theta_k, task.input, task_illums, net);
            Node* lp = loss_primary_node(tp, task.truth, task.css);
            require_finite(lp->value[0], "meta_train", step);
            pri += lp->value[0];
            accumulate(outer_acc, backward_gradients(tp, lp));

            // reconstruction gradient at the adapted point nudges the
            // original reconstruction head right away
            ForwardTrace ta = forward(theta_k, task.input, task_illums, net);
            Node* la = loss_auxiliary_node(ta, task.input);
            require_finite(la->value[0], "meta_train", step);
            aux += la->value[0];
            const GradMap ga = backward_gradients(ta, la);
            sgd_step(params, ga, config.alpha, Partition::auxiliary, true);
        }
        sgd_step(params, outer_acc, config.beta, Partition::shared, true);
        sgd_step(params, outer_acc, config.beta, Partition::primary, true);
        if (!params.all_finite()) {
            throw std::runtime_error("meta_train: non-finite parameters at step " + std::to_string(step));
        }

        const double inv = 1.0 / config.meta_tasks;
        log.add(step, "meta", "L_Pri", pri * inv);
        log.add(step, "meta", "L_Aux", aux * inv);
    }
    return log;
}

AdaptResult adapt_test_time(const ParamSet& params, const RgbStack& input,
                            const std::vector<IlluminationSpectrum>& illums, const NetConfig& net,
                            const TrainConfig& config) {
    AdaptResult result;
    result.log.seed = config.seed;
    PhaseTimer timer(result.log, "adapt");
    result.params = inner_adapt(params, input, illums, net, config.alpha, config.n_inner, &result.log, 0);

    ForwardTrace trace = forward(result.params, input, illums, net);
    result.log.add(config.n_inner, "adapt", "L_Aux", loss_auxiliary(trace, input));
    result.recovered = trace.r_hats[0];
    return result;
}

}  // namespace specrec
