#pragma once

#include <cstddef>
#include <vector>

#include "odecast/layers.hpp"
#include "odecast/tensor.hpp"

namespace odecast {

// Strictly increasing time points. Windows normalise their timestamps into
// [0, 1], which keeps Euler sub-step counts bounded by the max-step cap.
class TimeGrid {
public:
    TimeGrid() = default;
    explicit TimeGrid(std::vector<double> points);

    std::size_t size() const { return points_.size(); }
    double operator[](std::size_t i) const { return points_[i]; }
    const std::vector<double>& points() const { return points_; }

    // Evenly spaced grid over [0, 1].
    static TimeGrid regular(std::size_t n);

private:
    std::vector<double> points_;
};

// Latent states aligned with the grid points they were integrated to.
struct Trajectory {
    std::vector<Tensor> states; // states[i] is z(t_i)
};

// Fixed-step Euler integration of dz/dt = f(z, t). Between consecutive grid
// points the segment is split into ceil(dt / max_step) equal sub-steps, so no
// step exceeds max_step. The whole unroll is recorded on the tape, which is
// what makes the trajectory differentiable.
Trajectory integrate(Tape& tape, const DynamicsNet& f, const Tensor& z0, const TimeGrid& grid,
                     double max_step = 0.05);

// Total Euler sub-steps integrate() will take over this grid.
std::size_t step_count(const TimeGrid& grid, double max_step);

} // namespace odecast
