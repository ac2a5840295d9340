#include "conslp/runtime.hpp"

#include <atomic>
#include <barrier>
#include <cassert>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <limits>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace conslp {

namespace {

// Unbounded FIFO channel; every message is consumed exactly once.
template <typename T>
class Channel {
public:
    void send(T value) {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            queue_.push_back(std::move(value));
        }
        cv_.notify_one();
    }

    T recv() {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [this] { return !queue_.empty(); });
        T value = std::move(queue_.front());
        queue_.pop_front();
        return value;
    }

    bool empty() {
        std::lock_guard<std::mutex> lock(mutex_);
        return queue_.empty();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<T> queue_;
};

struct RingMsg {
    Vector numerator;
    double denominator = 0.0;
};

struct EvalMsg {
    double merit = 0.0;
    double r_cons = 0.0;
    double r_ineq = 0.0;
    double r_eq = 0.0;
    long clamps = 0;
};

enum class Phase { kEval, kUpdateX, kAggregateZ, kUpdateY, kUpdateDuals, kExit };

// Everything one consensus block carries between phases. The z copy is the
// block's own view of the common variable, refreshed by the broadcast leg
// of the ring; workers never read GlobalState during a phase.
struct BlockSlot {
    const BlockData* data = nullptr;
    BlockState state;
    Vector z;           // this block's copy of the common variable
    ProxParams prox;    // parameters of the current iteration
    Vector g_new;       // G_i(x^{k+1}), filled after the x sweep
    Vector h_new;       // H_i(x^{k+1})
    bool inner_failed = false;
    long z_epoch = 0;   // broadcast generation, for phase-order assertions
};

struct SharedCtx {
    const ProblemSpec* spec = nullptr;
    const SolverConfig* cfg = nullptr;
    Phase phase = Phase::kEval;
    long k = 0;
    double tau_k = 0.0;            // set by the coordinator before kUpdateX
    DualDirection direction = DualDirection::kDescent;
    std::atomic<bool> inner_failure{false};
    std::atomic<long> ring_sends{0};
};

class Orchestrator {
public:
    Orchestrator(const ProblemSpec& spec, const PartitionPlan& plan, const SolverConfig& cfg)
        : spec_(spec), cfg_(cfg), num_blocks_(plan.num_blocks),
          col_ranges_(plan.col_ranges) {
        bounds_ = slack_upper_bounds(spec, plan);
        data_ = make_block_data(spec, plan, bounds_);
        std::vector<BlockState> states;
        initialize_states(spec, data_, cfg, states, global_);
        slots_.resize(static_cast<size_t>(num_blocks_));
        for (int i = 0; i < num_blocks_; ++i) {
            auto& slot = slots_[static_cast<size_t>(i)];
            slot.data = &data_[static_cast<size_t>(i)];
            slot.state = std::move(states[static_cast<size_t>(i)]);
            slot.z = global_.z;
        }
        forward_.resize(static_cast<size_t>(std::max(0, num_blocks_ - 1)));
        for (auto& ch : forward_) ch = std::make_unique<Channel<RingMsg>>();
        broadcast_.resize(static_cast<size_t>(std::max(0, num_blocks_ - 1)));
        for (auto& ch : broadcast_) ch = std::make_unique<Channel<Vector>>();
        eval_chain_.resize(static_cast<size_t>(std::max(0, num_blocks_ - 1)));
        for (auto& ch : eval_chain_) ch = std::make_unique<Channel<EvalMsg>>();

        ctx_.spec = &spec_;
        ctx_.cfg = &cfg_;

        threads_ = cfg.threads == 0 ? num_blocks_ : std::min(cfg.threads, num_blocks_);
        threads_ = std::max(threads_, 1);
    }

    SolveReport solve(const RunOptions& options) {
        using clock = std::chrono::steady_clock;
        const auto t_start = clock::now();
        auto t_last = t_start;

        // Snapshot for the rate certificate before any update runs.
        std::vector<BlockState> init_blocks;
        GlobalState init_global = global_;
        if (options.rate_check) {
            if (cfg_.penalty_mode != PenaltyMode::kConsensusOnly ||
                cfg_.prox_schedule != ProxSchedule::kConstant)
                throw std::invalid_argument(
                    "rate check requires consensus-only penalty mode and the constant "
                    "prox schedule");
            for (const auto& s : slots_) init_blocks.push_back(s.state);
        }

        std::barrier<> start_barrier(threads_ + 1);
        std::barrier<> end_barrier(threads_ + 1);
        std::vector<std::thread> workers;
        for (int t = 0; t < threads_; ++t) {
            const int lo = t * num_blocks_ / threads_;
            const int hi = (t + 1) * num_blocks_ / threads_;
            workers.emplace_back([this, lo, hi, &start_barrier, &end_barrier] {
                worker_loop(lo, hi, start_barrier, end_barrier);
            });
        }
        auto run_phase = [&](Phase phase) {
            ctx_.phase = phase;
            start_barrier.arrive_and_wait();
            end_barrier.arrive_and_wait();
        };
        auto shut_down = [&] {
            ctx_.phase = Phase::kExit;
            start_barrier.arrive_and_wait();
            for (auto& w : workers) w.join();
        };

        SolveReport report;
        if (options.trace_sink) write_trace_header(*options.trace_sink);

        double merit_prev = 0.0;
        bool have_prev_merit = false;
        for (long k = 0;; ++k) {
            ctx_.k = k;
            run_phase(Phase::kEval);
            EvalMsg totals = reduce_eval();
            const Residuals res{totals.r_cons, totals.r_ineq, totals.r_eq};

            const bool residual_ok = res.max() <= cfg_.tol_residual;
            const bool merit_ok =
                !have_prev_merit || std::abs(totals.merit - merit_prev) <= cfg_.tol_merit;
            const bool stop_now = residual_ok && merit_ok;
            const bool hit_cap = k >= cfg_.max_iters;

            if (!hit_cap) {
                const auto now = clock::now();
                IterationTrace row;
                row.k = k;
                row.merit = totals.merit;
                row.r_cons = res.consensus;
                row.r_ineq = res.ineq;
                row.r_eq = res.eq;
                row.f_z = spec_.cost.dot(global_.z);
                row.clamp_count = totals.clamps;
                row.wall_time_us = static_cast<long>(
                    std::chrono::duration_cast<std::chrono::microseconds>(now - t_last).count());
                t_last = now;
                report.trace.push_back(row);
                if (options.trace_sink) record_trace(*options.trace_sink, row);
            }

            if (stop_now || hit_cap) {
                report.status = stop_now ? SolveStatus::kConverged : SolveStatus::kMaxIters;
                report.final_merit = totals.merit;
                report.final_residuals = res;
                report.clamp_events = totals.clamps;
                report.iterations = k;
                break;
            }
            merit_prev = totals.merit;
            have_prev_merit = true;

            // tau^k for this iteration, shared by every block.
            ctx_.tau_k = scheduled_prox(global_.tau0, (global_.z - global_.z_prev).norm(), k,
                                        cfg_.prox_schedule);
            ctx_.direction = k < cfg_.ascent_phase_iters ? DualDirection::kAscent
                                                         : DualDirection::kDescent;

            run_phase(Phase::kUpdateX);
            if (ctx_.inner_failure.load()) {
                // Inner box-QP failed; iteration aborts with the state as is.
                report.status = SolveStatus::kInnerFailure;
                report.final_merit = totals.merit;
                report.final_residuals = res;
                report.clamp_events = totals.clamps;
                report.iterations = k;
                break;
            }
            run_phase(Phase::kAggregateZ);
            ++report.ring_rounds;
            run_phase(Phase::kUpdateY);
            run_phase(Phase::kUpdateDuals);
        }
        shut_down();

        if (report.status == SolveStatus::kMaxIters && bounds_.any_infeasible())
            report.status = SolveStatus::kInfeasibleFlagged;

        report.z = global_.z;
        report.objective = spec_.cost.dot(global_.z);
        for (auto& slot : slots_) report.blocks.push_back(slot.state);
        report.ring_messages = ctx_.ring_sends.load();

        if (options.rate_check && report.status == SolveStatus::kConverged) {
            std::vector<Vector> slack_inf;
            for (const auto& slot : slots_) slack_inf.push_back(slot.state.slack);
            RateCheck rc;
            rc.c = rate_certificate(init_blocks, init_global, global_.z, slack_inf, cfg_);
            const double n_fz = double(num_blocks_) * report.objective;
            rc.max_violation = -std::numeric_limits<double>::infinity();
            for (const auto& row : report.trace)
                if (row.k >= 1)
                    rc.max_violation =
                        std::max(rc.max_violation, row.merit - n_fz - rc.c / double(row.k));
            rc.satisfied = rc.max_violation <= 1e-8;
            report.rate = rc;
        }

        // Protocol sanity: every message was consumed.
        for (auto& ch : forward_) assert(ch->empty());
        for (auto& ch : broadcast_) assert(ch->empty());
        assert(report.ring_messages == 2 * (num_blocks_ - 1) * report.ring_rounds);
        return report;
    }

private:
    void worker_loop(int lo, int hi, std::barrier<>& start_barrier, std::barrier<>& end_barrier) {
        for (;;) {
            start_barrier.arrive_and_wait();
            const Phase phase = ctx_.phase;
            if (phase == Phase::kExit) return;
            switch (phase) {
                case Phase::kEval:
                    for (int i = lo; i < hi; ++i) phase_eval(i);
                    break;
                case Phase::kUpdateX:
                    for (int i = lo; i < hi; ++i) phase_update_x(i);
                    break;
                case Phase::kAggregateZ:
                    for (int i = lo; i < hi; ++i) phase_ring_forward(i);
                    for (int i = lo; i < hi; ++i) phase_ring_receive(i);
                    break;
                case Phase::kUpdateY:
                    for (int i = lo; i < hi; ++i) phase_update_y(i);
                    break;
                case Phase::kUpdateDuals:
                    for (int i = lo; i < hi; ++i) phase_update_duals(i);
                    break;
                case Phase::kExit:
                    return;
            }
            end_barrier.arrive_and_wait();
        }
    }

    // Merit and residual contributions flow along the same chain as the
    // ring, combined in block-index order.
    void phase_eval(int i) {
        auto& slot = slots_[static_cast<size_t>(i)];
        EvalMsg msg;
        if (i > 0) msg = eval_chain_[static_cast<size_t>(i - 1)]->recv();
        msg.merit += block_merit(spec_, *slot.data, slot.state, slot.z, cfg_);
        const Residuals r = block_residuals(*slot.data, slot.state, slot.z);
        msg.r_cons = std::max(msg.r_cons, r.consensus);
        msg.r_ineq = std::max(msg.r_ineq, r.ineq);
        msg.r_eq = std::max(msg.r_eq, r.eq);
        msg.clamps += slot.state.clamp_events;
        if (i + 1 < num_blocks_)
            eval_chain_[static_cast<size_t>(i)]->send(msg);
        else
            eval_out_.send(msg);
    }

    EvalMsg reduce_eval() { return eval_out_.recv(); }

    void phase_update_x(int i) {
        auto& slot = slots_[static_cast<size_t>(i)];
        auto& st = slot.state;
        slot.prox.sigma = scheduled_prox(st.sigma0, (st.x - st.x_prev).norm(), ctx_.k,
                                         cfg_.prox_schedule);
        slot.prox.gamma = scheduled_prox(st.gamma0, (st.slack - st.slack_prev).norm(), ctx_.k,
                                         cfg_.prox_schedule);
        slot.prox.tau = ctx_.tau_k;
        st.x_prev = st.x;
        // Gauss-Seidel over subvectors: earlier ranges already hold k+1
        // values inside st.x, later ranges still hold k values.
        for (const ColRange& range : col_ranges_) {
            SubblockResult sub = update_x_subblock(spec_, *slot.data, st, slot.z, range,
                                                   slot.prox, cfg_);
            if (!sub.converged) {
                slot.inner_failed = true;
                ctx_.inner_failure.store(true);
                return;
            }
            st.x.segment(range.begin, range.size()) = sub.x;
        }
        slot.g_new = slot.data->ineq_value(st.x);
        slot.h_new = slot.data->eq_value(st.x);
    }

    void phase_ring_forward(int i) {
        auto& slot = slots_[static_cast<size_t>(i)];
        RingMsg msg;
        if (i == 0) {
            msg.numerator = Vector::Zero(spec_.n);
            msg.denominator = 0.0;
        } else {
            msg = forward_[static_cast<size_t>(i - 1)]->recv();
        }
        msg.numerator += slot.state.rho * slot.state.x + slot.state.dual_w + ctx_.tau_k * slot.z;
        msg.denominator += slot.state.rho + ctx_.tau_k;
        if (i + 1 < num_blocks_) {
            forward_[static_cast<size_t>(i)]->send(std::move(msg));
            ctx_.ring_sends.fetch_add(1);
            return;
        }
        // Final block closes the pass: computes z^{k+1}, updates the global
        // record, and broadcasts to every other block.
        Vector z_new = z_closed_form(msg.numerator, msg.denominator, spec_.lower, spec_.upper);
        global_.z_prev = global_.z;
        global_.z = z_new;
        for (int j = 0; j + 1 < num_blocks_; ++j) {
            broadcast_[static_cast<size_t>(j)]->send(z_new);
            ctx_.ring_sends.fetch_add(1);
        }
        slot.z = std::move(z_new);
        ++slot.z_epoch;
    }

    void phase_ring_receive(int i) {
        if (i + 1 == num_blocks_) return;  // finalizer already holds z^{k+1}
        auto& slot = slots_[static_cast<size_t>(i)];
        slot.z = broadcast_[static_cast<size_t>(i)]->recv();
        ++slot.z_epoch;
    }

    void phase_update_y(int i) {
        auto& slot = slots_[static_cast<size_t>(i)];
        assert(slot.z_epoch == ctx_.k + 1);  // no block may run before the broadcast
        auto& st = slot.state;
        st.slack_prev = st.slack;
        if (slot.data->num_ineq() > 0)
            st.slack = update_y(slot.g_new, st.slack, st.dual_mu,
                                cfg_.ineq_penalty_coeff(st.rho), slot.prox.gamma,
                                slot.data->slack_upper);
    }

    void phase_update_duals(int i) {
        auto& slot = slots_[static_cast<size_t>(i)];
        update_duals(slot.state, slot.z, slot.g_new, slot.h_new, cfg_, ctx_.direction);
    }

    const ProblemSpec& spec_;
    const SolverConfig& cfg_;
    int num_blocks_;
    int threads_ = 1;
    std::vector<ColRange> col_ranges_;
    SlackBounds bounds_;
    std::vector<BlockData> data_;
    std::vector<BlockSlot> slots_;
    GlobalState global_;
    SharedCtx ctx_;
    std::vector<std::unique_ptr<Channel<RingMsg>>> forward_;
    std::vector<std::unique_ptr<Channel<Vector>>> broadcast_;
    std::vector<std::unique_ptr<Channel<EvalMsg>>> eval_chain_;
    Channel<EvalMsg> eval_out_;
};

}  // namespace

SolveReport run(const ProblemSpec& spec, const PartitionPlan& plan, const SolverConfig& cfg,
                const RunOptions& options) {
    spec.validate();
    plan.validate(spec);
    cfg.validate();
    Orchestrator orchestrator(spec, plan, cfg);
    return orchestrator.solve(options);
}

std::pair<Vector, double> ring_aggregate(const std::vector<Vector>& contributions,
                                         const std::vector<double>& weights) {
    if (contributions.empty() || contributions.size() != weights.size())
        throw std::invalid_argument("ring_aggregate: mismatched inputs");
    Vector numerator = Vector::Zero(contributions.front().size());
    double denominator = 0.0;
    for (size_t i = 0; i < contributions.size(); ++i) {
        numerator += contributions[i];
        denominator += weights[i];
    }
    return {numerator, denominator};
}

const char* to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::kConverged: return "converged";
        case SolveStatus::kMaxIters: return "max_iters";
        case SolveStatus::kInnerFailure: return "inner_failure";
        case SolveStatus::kInfeasibleFlagged: return "infeasible_flagged";
    }
    return "unknown";
}

void write_trace_header(std::ostream& out) {
    out << "k,L_k,r_cons,r_ineq,r_eq,f_Z,clamp_count,wall_time_us\n";
}

void record_trace(std::ostream& out, const IterationTrace& row) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%ld,%ld\n", row.k,
                  row.merit, row.r_cons, row.r_ineq, row.r_eq, row.f_z, row.clamp_count,
                  row.wall_time_us);
    out << buf;
    if (!out) throw std::runtime_error("trace sink: write failed");
}

std::vector<IterationTrace> parse_trace_csv(std::istream& in) {
    std::vector<IterationTrace> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            first = false;  // header
            continue;
        }
        if (line.empty()) continue;
        IterationTrace row;
        if (std::sscanf(line.c_str(), "%ld,%lg,%lg,%lg,%lg,%lg,%ld,%ld", &row.k, &row.merit,
                        &row.r_cons, &row.r_ineq, &row.r_eq, &row.f_z, &row.clamp_count,
                        &row.wall_time_us) != 8)
            throw std::runtime_error("trace CSV: malformed row: " + line);
        rows.push_back(row);
    }
    return rows;
}

std::string SolveReport::to_json() const {
    nlohmann::json j;
    j["status"] = to_string(status);
    j["objective"] = objective;
    j["iterations"] = iterations;
    j["final_merit"] = final_merit;
    j["residuals"] = {{"consensus", final_residuals.consensus},
                      {"ineq", final_residuals.ineq},
                      {"eq", final_residuals.eq}};
    j["clamp_events"] = clamp_events;
    j["ring_messages"] = ring_messages;
    auto vec = [](const Vector& v) {
        nlohmann::json a = nlohmann::json::array();
        for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
        return a;
    };
    j["z"] = vec(z);
    j["blocks"] = nlohmann::json::array();
    for (const auto& b : blocks) {
        nlohmann::json jb;
        jb["x"] = vec(b.x);
        jb["slack"] = vec(b.slack);
        jb["dual_w"] = vec(b.dual_w);
        jb["dual_mu"] = vec(b.dual_mu);
        jb["dual_nu"] = vec(b.dual_nu);
        jb["clamp_events"] = b.clamp_events;
        j["blocks"].push_back(std::move(jb));
    }
    if (rate) {
        j["rate_certificate"] = {{"C", rate->c},
                                 {"max_violation", rate->max_violation},
                                 {"satisfied", rate->satisfied}};
    }
    j["trace"] = nlohmann::json::array();
    for (const auto& row : trace) {
        j["trace"].push_back({{"k", row.k},
                              {"L_k", row.merit},
                              {"r_cons", row.r_cons},
                              {"r_ineq", row.r_ineq},
                              {"r_eq", row.r_eq},
                              {"f_Z", row.f_z},
                              {"clamp_count", row.clamp_count},
                              {"wall_time_us", row.wall_time_us}});
    }
    return j.dump(2);
}

}  // namespace conslp
