#include "odecast/odesolver.hpp"

#include <cmath>
#include <string>

#include "odecast/errors.hpp"

namespace odecast {

TimeGrid::TimeGrid(std::vector<double> points) : points_(std::move(points)) {
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (!std::isfinite(points_[i]))
            throw ContractError("time grid: non-finite point");
        if (i > 0 && points_[i] <= points_[i - 1])
            throw ContractError("time grid: points must be strictly increasing");
    }
}

TimeGrid TimeGrid::regular(std::size_t n) {
    std::vector<double> pts(n);
    if (n == 1) {
        pts[0] = 0.0;
    } else {
        for (std::size_t i = 0; i < n; ++i)
            pts[i] = static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return TimeGrid(std::move(pts));
}

namespace {

std::size_t segment_steps(double t0, double t1, double max_step) {
    // The tiny slack keeps exact multiples (e.g. 1.0 / 0.05) from rounding up.
    const double n = std::ceil((t1 - t0) / max_step - 1e-12);
    return n < 1.0 ? 1 : static_cast<std::size_t>(n);
}

} // namespace

Trajectory integrate(Tape& tape, const DynamicsNet& f, const Tensor& z0, const TimeGrid& grid,
                     double max_step) {
    if (grid.size() == 0) throw ContractError("integrate: empty time grid");
    if (max_step <= 0.0) throw ContractError("integrate: max_step must be positive");
    if (!z0.all_finite()) throw NumericError("integrate: non-finite initial state");

    Trajectory traj;
    traj.states.reserve(grid.size());
    traj.states.push_back(z0);

    Tensor z = z0;
    std::size_t global_step = 0;
    for (std::size_t seg = 0; seg + 1 < grid.size(); ++seg) {
        const double t_start = grid[seg];
        const double t_end = grid[seg + 1];
        const std::size_t n_sub = segment_steps(t_start, t_end, max_step);
        const double h = (t_end - t_start) / static_cast<double>(n_sub);
        for (std::size_t s = 0; s < n_sub; ++s) {
            const double t = t_start + h * static_cast<double>(s);
            Tensor dz = f.eval(tape, z, t);
            z = add(tape, z, scale(tape, dz, h));
            ++global_step;
            if (!z.all_finite())
                throw NumericError("integrate: non-finite state at sub-step " +
                                   std::to_string(global_step));
        }
        traj.states.push_back(z);
    }
    return traj;
}

std::size_t step_count(const TimeGrid& grid, double max_step) {
    if (max_step <= 0.0) throw ContractError("step_count: max_step must be positive");
    std::size_t total = 0;
    for (std::size_t seg = 0; seg + 1 < grid.size(); ++seg)
        total += segment_steps(grid[seg], grid[seg + 1], max_step);
    return total;
}

} // namespace odecast
