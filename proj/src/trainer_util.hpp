#pragma once
#include <vector>

#include "uvmap/optim.hpp"
#include "uvmap/tape.hpp"

namespace uvmap::detail {

// Reference loss for the divergence guard is captured at this iteration, and
// rollback snapshots are refreshed at the same period.
inline constexpr std::size_t kSnapshotEvery = 100;

// in-memory rollback unit: parameter values plus optimizer moments
struct Snapshot {
    std::vector<Matrix> data;
    Adam::State opt;
};

inline Snapshot take_snapshot(const std::vector<ParamTensor*>& params,
                              const Adam& adam) {
    Snapshot s;
    s.data.reserve(params.size());
    for (const auto* t : params) s.data.push_back(t->data);
    s.opt = adam.save_state();
    return s;
}

inline void restore_snapshot(const Snapshot& s,
                             const std::vector<ParamTensor*>& params, Adam& adam) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i]->data = s.data[i];
        params[i]->zero_grad();
    }
    adam.restore_state(s.opt);
}

}  // namespace uvmap::detail
