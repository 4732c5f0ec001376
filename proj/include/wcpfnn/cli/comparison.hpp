#pragma once

// PFNN vs WC-PFNN comparison from two run logs: final MAE, worst-case
// violation and hypercube width per method, the violation reduction, and
// per-round curves normalized by each method's first verification round.

#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/enrich/enrich.hpp>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <optional>
#include <ostream>
#include <vector>

namespace wcpfnn::cli {

struct MethodSummary {
    double mae_percent = 0.0;
    double v_g_mva = 0.0;
    double d_normalized = 0.0;
    std::optional<double> d_fraction_nominal;
};

struct CurvePoint {
    int epoch = 0;
    std::optional<double> pfnn_v_g_mva;
    std::optional<double> wc_v_g_mva;
    std::optional<double> pfnn_relative;  // v_g / v_g at the first round
    std::optional<double> wc_relative;
};

struct ComparisonReport {
    MethodSummary pfnn;
    MethodSummary wc;
    std::optional<double> reduction_percent;
    std::vector<CurvePoint> curves;
};

// 100 (1 - v_wc / v_pfnn); undefined when the baseline has no violation,
// except that two zero violations count as no change.
inline std::optional<double> reduction_percent(double v_pfnn, double v_wc) {
    if (v_pfnn > 0.0) return 100.0 * (1.0 - v_wc / v_pfnn);
    if (v_wc == 0.0) return 0.0;
    return std::nullopt;
}

inline MethodSummary summarize(const enrich::RunLog& log) {
    MethodSummary s;
    s.mae_percent = log.final_mae_percent;
    if (!log.rounds.empty()) {
        const auto& r = log.rounds.back();
        s.v_g_mva = r.v_g_max_mva;
        s.d_normalized = r.d_normalized;
        s.d_fraction_nominal = r.d_fraction_nominal;
    }
    return s;
}

inline ComparisonReport compare_runs(const enrich::RunLog& pfnn, const enrich::RunLog& wc) {
    if (pfnn.test_size != wc.test_size) {
        spdlog::warn("run logs were evaluated on test splits of different size ({} vs {})", pfnn.test_size, wc.test_size);
    }
    ComparisonReport rep;
    rep.pfnn = summarize(pfnn);
    rep.wc = summarize(wc);
    rep.reduction_percent = reduction_percent(rep.pfnn.v_g_mva, rep.wc.v_g_mva);

    auto relative = [](const enrich::RunLog& log, double v) -> std::optional<double> {
        const double v0 = log.rounds.front().v_g_max_mva;
        if (!(v0 > 0.0)) return std::nullopt;
        return v / v0;
    };
    std::vector<int> epochs;
    for (const auto* log : {&pfnn, &wc}) {
        for (const auto& r : log->rounds) epochs.push_back(r.epoch);
    }
    std::sort(epochs.begin(), epochs.end());
    epochs.erase(std::unique(epochs.begin(), epochs.end()), epochs.end());
    for (int e : epochs) {
        CurvePoint p;
        p.epoch = e;
        for (const auto& r : pfnn.rounds) {
            if (r.epoch != e) continue;
            p.pfnn_v_g_mva = r.v_g_max_mva;
            p.pfnn_relative = relative(pfnn, r.v_g_max_mva);
        }
        for (const auto& r : wc.rounds) {
            if (r.epoch != e) continue;
            p.wc_v_g_mva = r.v_g_max_mva;
            p.wc_relative = relative(wc, r.v_g_max_mva);
        }
        rep.curves.push_back(p);
    }
    return rep;
}

namespace detail {

inline nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

inline nlohmann::json to_json(const MethodSummary& s) {
    return {{"MAE_percent", s.mae_percent},
            {"v_g_mva", s.v_g_mva},
            {"d_normalized", s.d_normalized},
            {"d_fraction_nominal", opt(s.d_fraction_nominal)}};
}

}  // namespace detail

inline nlohmann::json to_json(const ComparisonReport& r) {
    nlohmann::json curves = nlohmann::json::array();
    for (const auto& p : r.curves) {
        curves.push_back({{"epoch", p.epoch},
                          {"pfnn_v_g_mva", detail::opt(p.pfnn_v_g_mva)},
                          {"wc_pfnn_v_g_mva", detail::opt(p.wc_v_g_mva)},
                          {"pfnn_relative", detail::opt(p.pfnn_relative)},
                          {"wc_pfnn_relative", detail::opt(p.wc_relative)}});
    }
    return {{"pfnn", detail::to_json(r.pfnn)},
            {"wc_pfnn", detail::to_json(r.wc)},
            {"reduction_percent", detail::opt(r.reduction_percent)},
            {"curves", curves}};
}

// epoch,pfnn_v_g_mva,wc_pfnn_v_g_mva,pfnn_relative,wc_pfnn_relative (empty = missing).
inline void write_curves_csv(std::ostream& out, const ComparisonReport& r) {
    out << "epoch,pfnn_v_g_mva,wc_pfnn_v_g_mva,pfnn_relative,wc_pfnn_relative\n";
    auto put = [&](const std::optional<double>& v) {
        out << ',';
        if (!v) return;
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", *v);
        out << buf;
    };
    for (const auto& p : r.curves) {
        out << p.epoch;
        put(p.pfnn_v_g_mva);
        put(p.wc_v_g_mva);
        put(p.pfnn_relative);
        put(p.wc_relative);
        out << '\n';
    }
}

}  // namespace wcpfnn::cli
