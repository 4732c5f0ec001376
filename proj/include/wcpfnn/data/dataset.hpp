#pragma once

#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/core/random.hpp>
#include <wcpfnn/data/lhs.hpp>
#include <wcpfnn/grid/input_domain.hpp>
#include <wcpfnn/grid/network_case.hpp>
#include <wcpfnn/grid/quadratic_forms.hpp>
#include <wcpfnn/opf/opf_solver.hpp>

#include <Eigen/Dense>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace wcpfnn::data {

enum class Origin { Lhs, Enrichment };
enum class Split { Train, Validation, Test };

inline const char* to_string(Origin o) { return o == Origin::Lhs ? "lhs" : "enrichment"; }

inline const char* to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "train";
}

struct Sample {
    Eigen::VectorXd demand;                     // D
    std::optional<Eigen::VectorXd> generation;  // G label
    std::optional<Eigen::VectorXd> voltage;     // v label
    bool labeled = false;
    Origin origin = Origin::Lhs;
    Split split = Split::Train;
};

struct Dataset {
    std::vector<Sample> samples;
    grid::InputDomain domain;
    nlohmann::json provenance = nlohmann::json::object();

    std::size_t size() const { return samples.size(); }

    std::size_t count(Split s) const {
        return static_cast<std::size_t>(
            std::count_if(samples.begin(), samples.end(), [s](const Sample& x) { return x.split == s; }));
    }

    std::vector<const Sample*> select(Split s) const {
        std::vector<const Sample*> out;
        for (const auto& x : samples) {
            if (x.split == s) out.push_back(&x);
        }
        return out;
    }

    // Checks sample invariants and dimensions against a model.
    void check(const grid::QuadraticFormModel& qf) const {
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto& s = samples[i];
            const std::string where = "sample " + std::to_string(i);
            require_dimension(static_cast<std::size_t>(s.demand.size()), qf.demand_dim(), where + " demand");
            if (s.labeled) {
                if (!s.generation || !s.voltage) throw ValidationError(where + " is labeled but has no labels");
                require_dimension(static_cast<std::size_t>(s.generation->size()), qf.generation_dim(), where + " generation");
                require_dimension(static_cast<std::size_t>(s.voltage->size()), qf.voltage_dim(), where + " voltage");
            } else if (s.origin != Origin::Enrichment) {
                throw ValidationError(where + " is unlabeled but not an enrichment point");
            }
            if (s.origin == Origin::Enrichment && s.split != Split::Train) {
                throw ValidationError(where + " is an enrichment point outside the training split");
            }
        }
    }
};

struct SplitFractions {
    double train = 0.5;
    double validation = 0.2;
    double test = 0.3;

    void check() const {
        if (train < 0.0 || validation < 0.0 || test < 0.0) throw ConfigError("split fractions must be nonnegative");
        if (std::abs(train + validation + test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
    }
};

// Tags LHS samples train/validation/test through a seeded permutation:
// round(f_train n) train, round(f_val n) validation, the rest test.
// Enrichment samples are always train.
inline void assign_splits(Dataset& ds, std::uint64_t seed, const SplitFractions& f = {}) {
    f.check();
    std::vector<std::size_t> lhs;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        if (ds.samples[i].origin == Origin::Lhs) {
            lhs.push_back(i);
        } else {
            ds.samples[i].split = Split::Train;
        }
    }
    Rng rng(seed);
    rng.shuffle(lhs);
    const auto n = static_cast<double>(lhs.size());
    const auto n_train = std::min(lhs.size(), static_cast<std::size_t>(std::llround(f.train * n)));
    const auto n_val = std::min(lhs.size() - n_train, static_cast<std::size_t>(std::llround(f.validation * n)));
    for (std::size_t k = 0; k < lhs.size(); ++k) {
        ds.samples[lhs[k]].split = k < n_train ? Split::Train : (k < n_train + n_val ? Split::Validation : Split::Test);
    }
}

struct Label {
    Eigen::VectorXd generation;
    Eigen::VectorXd voltage;
};

// Returns the OPF label of a demand vector, or nothing when it fails.
// Must be safe to call concurrently.
using Labeler = std::function<std::optional<Label>(const Eigen::VectorXd& demand)>;

inline Labeler make_opf_labeler(const grid::QuadraticFormModel& qf, const opf::PenaltyConfig& cfg = {}) {
    return [&qf, cfg](const Eigen::VectorXd& d) -> std::optional<Label> {
        try {
            const auto sol = opf::solve_opf_penalty(qf, d, cfg);
            return Label{sol.generation, sol.voltage};
        } catch (const NumericalError&) {
            return std::nullopt;
        }
    };
}

// Labels each point, using up to `threads` workers. Results are stored by
// index, so the output does not depend on scheduling.
inline std::vector<std::optional<Label>> label_points(const std::vector<Eigen::VectorXd>& points, const Labeler& labeler,
                                                      unsigned threads = 1) {
    std::vector<std::optional<Label>> out(points.size());
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(points.size())));
    if (threads <= 1) {
        for (std::size_t i = 0; i < points.size(); ++i) out[i] = labeler(points[i]);
        return out;
    }
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < points.size(); i += threads) out[i] = labeler(points[i]);
        });
    }
    for (auto& th : pool) th.join();
    return out;
}

class LabelingError : public NumericalError {
public:
    LabelingError(const std::string& what, std::size_t failures, std::size_t attempted)
        : NumericalError(what), failures_(failures), attempted_(attempted) {}
    std::size_t failures() const { return failures_; }
    std::size_t attempted() const { return attempted_; }

private:
    std::size_t failures_;
    std::size_t attempted_;
};

struct GenerateOptions {
    double max_failure_fraction = 0.05;
    int replacement_retries = 2;
    unsigned threads = 1;
    SplitFractions fractions;
};

// Draws n LHS points, labels them, replaces failed points with fresh LHS
// draws (up to `replacement_retries` rounds) and assigns splits.
inline Dataset generate_labeled_dataset(const grid::NetworkCase& c, const grid::QuadraticFormModel& qf,
                                        const grid::InputDomain& domain, std::size_t n, std::uint64_t seed,
                                        const Labeler& labeler, const GenerateOptions& opt = {}) {
    if (n == 0) throw ValidationError("dataset size must be >= 1");
    require_dimension(static_cast<std::size_t>(domain.dim()), qf.demand_dim(), "input domain");
    Dataset ds;
    ds.domain = domain;

    auto add_labeled = [&](const std::vector<Eigen::VectorXd>& pts, const std::vector<std::optional<Label>>& labels,
                           std::size_t limit) {
        std::size_t failed = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (!labels[i]) {
                ++failed;
                spdlog::debug("labeling failed for point {}, dropped", i);
                continue;
            }
            if (ds.samples.size() >= limit) continue;
            Sample s;
            s.demand = pts[i];
            s.generation = labels[i]->generation;
            s.voltage = labels[i]->voltage;
            s.labeled = true;
            s.origin = Origin::Lhs;
            ds.samples.push_back(std::move(s));
        }
        return failed;
    };

    const auto points = lhs_sample(domain, n, seed);
    const std::size_t failed = add_labeled(points, label_points(points, labeler, opt.threads), n);
    if (static_cast<double>(failed) > opt.max_failure_fraction * static_cast<double>(n)) {
        throw LabelingError("labeling failed for " + std::to_string(failed) + " of " + std::to_string(n) +
                                " points (limit " + std::to_string(opt.max_failure_fraction * 100.0) + "%)",
                            failed, n);
    }
    if (failed > 0) spdlog::warn("{} of {} points failed to label and were dropped", failed, n);

    for (int retry = 1; retry <= opt.replacement_retries && ds.samples.size() < n; ++retry) {
        const std::size_t missing = n - ds.samples.size();
        const auto extra = lhs_sample(domain, missing, derive_seed(seed, static_cast<std::uint64_t>(retry)));
        add_labeled(extra, label_points(extra, labeler, opt.threads), n);
    }
    if (ds.samples.size() < n) spdlog::warn("dataset holds {} of {} requested points after retries", ds.samples.size(), n);

    assign_splits(ds, derive_seed(seed, 100), opt.fractions);
    ds.provenance = {{"case", c.name},
                     {"n", n},
                     {"seed", seed},
                     {"label_failures", failed},
                     {"fractions", {opt.fractions.train, opt.fractions.validation, opt.fractions.test}}};
    return ds;
}

}  // namespace wcpfnn::data
