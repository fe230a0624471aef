#pragma once

#include <functional>

#include "frvs/autodiff.hpp"

namespace frvs {

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    int probes = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double tolerance = 1e-3;

    bool passed() const {
        for (const auto& e : entries)
            if (!(e.max_rel_err < tolerance)) return false;
        return true;
    }
    double worst() const {
        double w = 0;
        for (const auto& e : entries) w = std::max(w, e.max_rel_err);
        return w;
    }
};

// Central-difference check of d f / d params at randomly sampled coordinates.
// `build` must be a deterministic function of the store's current values.
inline GradCheckReport gradcheck(ParameterStoreT<double>& store,
                                 const std::function<NodePtrT<double>()>& build, int probes = 5,
                                 double epsilon = 1e-4, double tolerance = 1e-3,
                                 unsigned seed = 1234) {
    GradCheckReport report;
    report.tolerance = tolerance;

    store.zero_grad();
    auto root = build();
    backward(root);

    std::mt19937 rng(seed);
    for (auto& [name, node] : store.params) {
        GradCheckEntry entry{name, 0.0, 0};
        const std::size_t n = node->value.numel();
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        const int count = static_cast<int>(std::min<std::size_t>(probes, n));
        for (int i = 0; i < count; ++i) {
            std::size_t idx = pick(rng);
            double saved = node->value.data[idx];
            node->value.data[idx] = saved + epsilon;
            double fp = build()->value.data[0];
            node->value.data[idx] = saved - epsilon;
            double fm = build()->value.data[0];
            node->value.data[idx] = saved;
            double fd = (fp - fm) / (2.0 * epsilon);
            double an = node->grad.data.empty() ? 0.0 : node->grad.data[idx];
            double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            entry.max_rel_err = std::max(entry.max_rel_err, std::abs(fd - an) / denom);
            ++entry.probes;
        }
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace frvs
