#pragma once

#include <sys/types.h>
#include <sys/wait.h>
#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "oba/errors.hpp"
#include "oba/policy.hpp"
#include "oba/rng.hpp"

namespace oba {

// ---------------------------------------------------------------------------
// Generic TPE core over a list of dimensions.
// ---------------------------------------------------------------------------

namespace tpe {

struct ContinuousDim {
    double lo = 0.0;
    double hi = 1.0;
};
struct CategoricalDim {
    int n_categories = 2;
};
using Dim = std::variant<ContinuousDim, CategoricalDim>;

struct Observation {
    std::vector<double> params;  // categorical values stored as category index
    double value = 0.0;
};

struct TpeOptions {
    int n_startup = 10;       // uniform sampling for the first trials
    double gamma = 0.25;      // good/bad split quantile
    int n_candidates = 24;    // candidates drawn from l(x) per dimension
    double categorical_alpha = 1.0;  // smoothing for category frequencies
};

namespace detail {

inline double norm_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Gaussian KDE with Scott's-rule bandwidth, truncated to [lo, hi].
struct TruncatedKde {
    std::vector<double> centers;
    double bandwidth = 1.0;
    double lo = 0.0, hi = 1.0;

    static TruncatedKde fit(std::vector<double> xs, double lo, double hi) {
        TruncatedKde kde;
        kde.lo = lo;
        kde.hi = hi;
        kde.centers = std::move(xs);
        const double n = static_cast<double>(kde.centers.size());
        double mean = 0.0;
        for (double x : kde.centers) mean += x;
        mean /= n;
        double var = 0.0;
        for (double x : kde.centers) var += (x - mean) * (x - mean);
        const double sigma = std::sqrt(var / n);
        kde.bandwidth = std::max(sigma * std::pow(n, -0.2), 1e-3 * (hi - lo));
        return kde;
    }

    double density(double x) const {
        double acc = 0.0;
        for (double mu : centers) {
            const double z = norm_cdf((hi - mu) / bandwidth) - norm_cdf((lo - mu) / bandwidth);
            if (z <= 0.0) continue;
            acc += norm_pdf((x - mu) / bandwidth) / (bandwidth * z);
        }
        return acc / static_cast<double>(centers.size());
    }

    double sample(Rng& rng) const {
        const double mu = centers[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(centers.size()) - 1))];
        for (int tries = 0; tries < 100; ++tries) {
            const double x = mu + bandwidth * rng.normal();
            if (x >= lo && x <= hi) return x;
        }
        return std::clamp(mu, lo, hi);
    }
};

struct CategoryModel {
    std::vector<double> weights;  // normalized, smoothed

    static CategoryModel fit(const std::vector<double>& xs, int n_categories,
                             double alpha) {
        CategoryModel model;
        model.weights.assign(static_cast<std::size_t>(n_categories), alpha);
        for (double x : xs) {
            const int c = std::clamp(static_cast<int>(std::lround(x)), 0, n_categories - 1);
            model.weights[static_cast<std::size_t>(c)] += 1.0;
        }
        double total = 0.0;
        for (double w : model.weights) total += w;
        for (double& w : model.weights) w /= total;
        return model;
    }

    double density(int c) const { return weights[static_cast<std::size_t>(c)]; }

    int sample(Rng& rng) const {
        const double u = rng.uniform();
        double acc = 0.0;
        for (std::size_t c = 0; c < weights.size(); ++c) {
            acc += weights[c];
            if (u < acc) return static_cast<int>(c);
        }
        return static_cast<int>(weights.size()) - 1;
    }
};

}  // namespace detail

inline double sample_uniform(const Dim& dim, Rng& rng) {
    return std::visit(
        [&](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, ContinuousDim>)
                return rng.uniform(d.lo, d.hi);
            else
                return static_cast<double>(rng.uniform_int(0, d.n_categories - 1));
        },
        dim);
}

/// Suggest the next point. The first n_startup trials are uniform; after
/// that each dimension independently splits completed observations at the
/// gamma-quantile of value into good/bad sets, fits a density to each, draws
/// n_candidates from the good density and keeps the candidate with the best
/// good/bad density ratio.
inline std::vector<double> suggest(const std::vector<Dim>& dims,
                                   const std::vector<Observation>& completed, Rng& rng,
                                   const TpeOptions& options = {}) {
    std::vector<double> out(dims.size());
    const std::size_t n = completed.size();
    if (static_cast<int>(n) < options.n_startup || n < 2) {
        for (std::size_t d = 0; d < dims.size(); ++d) out[d] = sample_uniform(dims[d], rng);
        return out;
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (completed[a].value != completed[b].value)
            return completed[a].value < completed[b].value;
        return a < b;
    });
    const std::size_t n_good = std::min(
        n - 1, static_cast<std::size_t>(std::max(
                   1.0, std::ceil(options.gamma * static_cast<double>(n)))));

    for (std::size_t d = 0; d < dims.size(); ++d) {
        std::vector<double> good, bad;
        good.reserve(n_good);
        bad.reserve(n - n_good);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = completed[order[i]].params[d];
            (i < n_good ? good : bad).push_back(x);
        }
        out[d] = std::visit(
            [&](const auto& dim) -> double {
                using T = std::decay_t<decltype(dim)>;
                if constexpr (std::is_same_v<T, ContinuousDim>) {
                    const auto l = detail::TruncatedKde::fit(good, dim.lo, dim.hi);
                    const auto g = detail::TruncatedKde::fit(bad, dim.lo, dim.hi);
                    double best_x = 0.0, best_ratio = -1.0;
                    for (int c = 0; c < options.n_candidates; ++c) {
                        const double x = l.sample(rng);
                        const double ratio = l.density(x) / (g.density(x) + 1e-12);
                        if (ratio > best_ratio) {
                            best_ratio = ratio;
                            best_x = x;
                        }
                    }
                    return best_x;
                } else {
                    const auto l = detail::CategoryModel::fit(good, dim.n_categories,
                                                              options.categorical_alpha);
                    const auto g = detail::CategoryModel::fit(bad, dim.n_categories,
                                                              options.categorical_alpha);
                    int best_c = 0;
                    double best_ratio = -1.0;
                    for (int c = 0; c < options.n_candidates; ++c) {
                        const int x = l.sample(rng);
                        const double ratio = l.density(x) / (g.density(x) + 1e-12);
                        if (ratio > best_ratio) {
                            best_ratio = ratio;
                            best_c = x;
                        }
                    }
                    return static_cast<double>(best_c);
                }
            },
            dims[d]);
    }
    return out;
}

}  // namespace tpe

// ---------------------------------------------------------------------------
// Study state, pruning, persistence.
// ---------------------------------------------------------------------------

enum class TrialStatus { running, pruned, complete, failed };

inline std::string_view to_string(TrialStatus s) {
    switch (s) {
        case TrialStatus::running: return "running";
        case TrialStatus::pruned: return "pruned";
        case TrialStatus::complete: return "complete";
        case TrialStatus::failed: return "failed";
    }
    return "unknown";
}

inline TrialStatus trial_status_from_string(const std::string& s) {
    if (s == "running") return TrialStatus::running;
    if (s == "pruned") return TrialStatus::pruned;
    if (s == "complete") return TrialStatus::complete;
    if (s == "failed") return TrialStatus::failed;
    raise(ErrorCode::StoreCorrupt, "unknown trial status '" + s + "'");
}

struct TrialRecord {
    int trial_id = 0;
    AugPolicy policy;
    std::vector<std::pair<int, double>> intermediate;  // (epoch, loss), strictly increasing
    TrialStatus status = TrialStatus::running;
    std::optional<double> final_value;  // present iff complete

    std::optional<double> value_at(int epoch) const {
        for (const auto& [e, v] : intermediate)
            if (e == epoch) return v;
        return std::nullopt;
    }
};

struct StudyState {
    std::vector<TrialRecord> trials;
    std::uint64_t rng_seed = 0;
    // direction: minimize

    const TrialRecord* best() const {
        const TrialRecord* best = nullptr;
        for (const TrialRecord& t : trials)
            if (t.status == TrialStatus::complete &&
                (!best || *t.final_value < *best->final_value))
                best = &t;
        return best;
    }
};

/// The four searched pipeline knobs: extra object count in {0..3} and three
/// probabilities in [0,1].
struct SearchSpace {
    int extra_objects_categories = 4;
    std::pair<double, double> background_prob{0.0, 1.0};
    std::pair<double, double> oba_prob{0.0, 1.0};
    std::pair<double, double> color_prob{0.0, 1.0};

    std::vector<tpe::Dim> dims() const {
        return {tpe::CategoricalDim{extra_objects_categories},
                tpe::ContinuousDim{background_prob.first, background_prob.second},
                tpe::ContinuousDim{oba_prob.first, oba_prob.second},
                tpe::ContinuousDim{color_prob.first, color_prob.second}};
    }

    /// A searched extra-object count k yields the range (0, k): "up to k"
    /// objects per crop.
    AugPolicy to_policy(const std::vector<double>& xs, const AugPolicy& base) const {
        AugPolicy p = base;
        p.extra_objects = {0, static_cast<int>(std::lround(xs[0]))};
        p.use_extra_background_prob = xs[1];
        p.oba_prob = xs[2];
        p.color_aug_prob = xs[3];
        return p;
    }

    std::vector<double> params_of(const AugPolicy& p) const {
        return {static_cast<double>(p.extra_objects.second), p.use_extra_background_prob,
                p.oba_prob, p.color_aug_prob};
    }
};

struct PrunerOptions {
    int n_min_trials = 5;  // completed trials required at the epoch
    int n_warmup = 2;      // epochs below this never prune
};

/// Median rule: prune iff at least n_min_trials completed trials reported a
/// value at this epoch and the candidate's value is strictly greater than
/// their median. Warmup epochs are exempt.
inline bool should_prune(const StudyState& state, const TrialRecord& trial, int epoch,
                         const PrunerOptions& options = {}) {
    const auto candidate = trial.value_at(epoch);
    if (!candidate)
        raise(ErrorCode::EpochNotReported,
              "trial " + std::to_string(trial.trial_id) + " has no value at epoch " +
                  std::to_string(epoch));
    if (epoch < options.n_warmup) return false;

    std::vector<double> values;
    for (const TrialRecord& t : state.trials) {
        if (t.status != TrialStatus::complete) continue;
        if (const auto v = t.value_at(epoch)) values.push_back(*v);
    }
    if (static_cast<int>(values.size()) < options.n_min_trials) return false;

    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    const double median =
        n % 2 == 1 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
    return *candidate > median;
}

/// Suggest a policy for the next trial from the completed history.
inline AugPolicy suggest(const SearchSpace& space, const StudyState& state, Rng& rng,
                         const AugPolicy& base = {}, const tpe::TpeOptions& options = {}) {
    std::vector<tpe::Observation> completed;
    for (const TrialRecord& t : state.trials)
        if (t.status == TrialStatus::complete && t.final_value)
            completed.push_back({space.params_of(t.policy), *t.final_value});

    // Startup counts every past trial, completed or not.
    tpe::TpeOptions opts = options;
    if (static_cast<int>(state.trials.size()) < opts.n_startup) opts.n_startup =
        static_cast<int>(completed.size()) + 1;  // force uniform this round
    const auto xs = tpe::suggest(space.dims(), completed, rng, opts);
    return space.to_policy(xs, base);
}

// ---------------------------------------------------------------------------
// JSON-lines store.
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const TrialRecord& trial) {
    nlohmann::json intermediate = nlohmann::json::array();
    for (const auto& [epoch, loss] : trial.intermediate)
        intermediate.push_back({epoch, loss});
    nlohmann::json j = {{"trial_id", trial.trial_id},
                        {"policy", to_json(trial.policy)},
                        {"intermediate", intermediate},
                        {"status", std::string(to_string(trial.status))}};
    if (trial.final_value) j["final_value"] = *trial.final_value;
    return j;
}

inline TrialRecord trial_from_json(const nlohmann::json& j) {
    TrialRecord trial;
    try {
        trial.trial_id = j.at("trial_id").get<int>();
        trial.policy = policy_from_json(j.at("policy"));
        for (const auto& pair : j.at("intermediate"))
            trial.intermediate.emplace_back(pair[0].get<int>(), pair[1].get<double>());
        trial.status = trial_status_from_string(j.at("status").get<std::string>());
        if (j.contains("final_value")) trial.final_value = j["final_value"].get<double>();
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        raise(ErrorCode::StoreCorrupt, std::string("bad trial record: ") + e.what());
    }
    if (trial.final_value.has_value() != (trial.status == TrialStatus::complete))
        raise(ErrorCode::StoreCorrupt, "final_value must be present iff complete");
    return trial;
}

/// Append one trial snapshot to the store. The store is a JSON-lines log;
/// later lines for the same trial_id supersede earlier ones on replay.
inline void append_trial(const std::filesystem::path& store, const TrialRecord& trial) {
    std::ofstream out(store, std::ios::app);
    if (!out) raise(ErrorCode::IoError, "cannot append to " + store.string());
    out << to_json(trial).dump() << "\n";
    out.flush();
}

/// Replay the store into a state. Trials left 'running' by an interrupted
/// run are dropped so they get re-run with the same trial id.
inline StudyState load_study(const std::filesystem::path& store, std::uint64_t rng_seed) {
    StudyState state;
    state.rng_seed = rng_seed;
    if (!std::filesystem::exists(store)) return state;
    std::ifstream in(store);
    if (!in) raise(ErrorCode::IoError, "cannot open " + store.string());
    std::map<int, TrialRecord> latest;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            raise(ErrorCode::StoreCorrupt, "line " + std::to_string(line_no) + ": " + e.what());
        }
        TrialRecord trial = trial_from_json(j);
        latest[trial.trial_id] = std::move(trial);
    }
    for (auto& [id, trial] : latest)
        if (trial.status != TrialStatus::running) state.trials.push_back(std::move(trial));
    return state;
}

/// Rewrite the store as one line per trial (normal form). Reading and
/// rewriting an already-normalized store is a fixed point.
inline void save_study(const std::filesystem::path& store, const StudyState& state) {
    std::ofstream out(store, std::ios::trunc);
    if (!out) raise(ErrorCode::IoError, "cannot write " + store.string());
    for (const TrialRecord& trial : state.trials) out << to_json(trial).dump() << "\n";
}

// ---------------------------------------------------------------------------
// Subprocess trainer driver.
// ---------------------------------------------------------------------------

namespace search_detail {

struct ChildProcess {
    pid_t pid = -1;
    FILE* out = nullptr;
};

inline ChildProcess spawn_shell(const std::string& command) {
    int fds[2];
    if (pipe(fds) != 0) raise(ErrorCode::IoError, "pipe() failed");
    const pid_t pid = fork();
    if (pid < 0) raise(ErrorCode::IoError, "fork() failed");
    if (pid == 0) {
        setpgid(0, 0);  // own process group so the whole pipeline can be signaled
        dup2(fds[1], STDOUT_FILENO);
        close(fds[0]);
        close(fds[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(fds[1]);
    FILE* out = fdopen(fds[0], "r");
    if (!out) {
        close(fds[0]);
        raise(ErrorCode::IoError, "fdopen() failed");
    }
    return {pid, out};
}

inline bool parse_epoch_line(const std::string& line, int& epoch, double& loss) {
    std::istringstream in(line);
    std::string word_epoch, word_loss, rest;
    if (!(in >> word_epoch) || word_epoch != "EPOCH") return false;
    if (!(in >> epoch)) return false;
    if (!(in >> word_loss) || word_loss != "LOSS") return false;
    if (!(in >> loss)) return false;
    if (in >> rest) return false;  // trailing tokens invalidate the line
    return true;
}

}  // namespace search_detail

struct StudyOptions {
    tpe::TpeOptions tpe;
    PrunerOptions pruner;
    AugPolicy base_policy;
    std::function<void(const TrialRecord&)> on_trial_end;  // optional progress hook
};

/// Drive an external trainer through `budget` trials. Each trial suggests a
/// policy, writes it as JSON next to the store, runs
///   <trainer_command> --policy <path> --epochs <N>
/// and streams `EPOCH <k> LOSS <v>` lines from its stdout. The median pruner
/// is consulted after every epoch; pruning terminates the trainer process.
/// Every state change is appended to the store, so a killed study resumes
/// where it stopped (interrupted trials re-run under the same id). Trainer
/// crashes mark the trial failed and the study continues.
inline StudyState run_study(const SearchSpace& space, int budget, int epochs_per_trial,
                            const std::string& trainer_command,
                            const std::filesystem::path& store, std::uint64_t study_seed,
                            const StudyOptions& options = {}) {
    StudyState state = load_study(store, study_seed);

    while (static_cast<int>(state.trials.size()) < budget) {
        TrialRecord trial;
        trial.trial_id = static_cast<int>(state.trials.size());
        Rng trial_rng(mix64(study_seed, static_cast<std::uint64_t>(trial.trial_id)));
        trial.policy =
            suggest(space, state, trial_rng, options.base_policy, options.tpe);
        trial.status = TrialStatus::running;
        append_trial(store, trial);

        const std::filesystem::path policy_path =
            store.parent_path() /
            (store.stem().string() + ".trial" + std::to_string(trial.trial_id) +
             ".policy.json");
        {
            std::ofstream out(policy_path);
            if (!out) raise(ErrorCode::IoError, "cannot write " + policy_path.string());
            out << to_json(trial.policy).dump(2) << "\n";
        }

        const std::string command = trainer_command + " --policy " + policy_path.string() +
                                    " --epochs " + std::to_string(epochs_per_trial);
        auto child = search_detail::spawn_shell(command);

        bool pruned = false;
        char* line_buf = nullptr;
        std::size_t line_cap = 0;
        ssize_t len;
        while ((len = getline(&line_buf, &line_cap, child.out)) != -1) {
            std::string line(line_buf, static_cast<std::size_t>(len));
            while (!line.empty() && (line.back() == '\n' || line.back() == '\r'))
                line.pop_back();
            int epoch;
            double loss;
            if (!search_detail::parse_epoch_line(line, epoch, loss)) continue;
            if (!trial.intermediate.empty() && epoch <= trial.intermediate.back().first)
                continue;  // keep epochs strictly increasing
            trial.intermediate.emplace_back(epoch, loss);
            append_trial(store, trial);
            if (should_prune(state, trial, epoch, options.pruner)) {
                pruned = true;
                kill(-child.pid, SIGTERM);
                break;
            }
        }
        free(line_buf);
        // Drain whatever remains so the child can exit, then reap it.
        char drain[4096];
        while (fread(drain, 1, sizeof(drain), child.out) > 0) {
        }
        fclose(child.out);
        int wait_status = 0;
        waitpid(child.pid, &wait_status, 0);

        if (pruned) {
            trial.status = TrialStatus::pruned;
        } else if (WIFEXITED(wait_status) && WEXITSTATUS(wait_status) == 0 &&
                   !trial.intermediate.empty()) {
            trial.status = TrialStatus::complete;
            trial.final_value = trial.intermediate.back().second;
        } else {
            trial.status = TrialStatus::failed;
        }
        append_trial(store, trial);
        if (options.on_trial_end) options.on_trial_end(trial);
        state.trials.push_back(std::move(trial));
    }
    return state;
}

}  // namespace oba
