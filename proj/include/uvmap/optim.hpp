#pragma once
#include <vector>

#include "uvmap/tape.hpp"

namespace uvmap {

// ---------------------------------------------------------------------------
// Adam — first-order adaptive optimizer with bias-corrected moments
// ---------------------------------------------------------------------------

class Adam {
public:
    explicit Adam(std::vector<ParamTensor*> params, double beta1 = 0.9,
                  double beta2 = 0.999, double epsilon = 1e-8);

    // One update from the accumulated gradients; zeroes them afterwards.
    void step(double lr);

    [[nodiscard]] std::size_t step_count() const { return t_; }
    [[nodiscard]] const std::vector<ParamTensor*>& params() const { return params_; }

    // Moment state snapshot/restore, used for divergence rollback.
    struct State {
        std::vector<Matrix> m, v;
        std::size_t t = 0;
    };
    [[nodiscard]] State save_state() const;
    void restore_state(const State& s);

private:
    std::vector<ParamTensor*> params_;
    std::vector<Matrix> m_, v_;
    double b1_, b2_, eps_;
    std::size_t t_ = 0;
};

// Cosine decay from lr_max at step 0 to lr_min at step total-1.
double cosine_lr(double lr_max, double lr_min, std::size_t step, std::size_t total);

}  // namespace uvmap
