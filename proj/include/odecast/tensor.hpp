#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "odecast/errors.hpp"

namespace odecast {

// Dense rank-0/1/2 real tensor with an optional gradient slot. Value is held
// behind a shared handle so the tape can accumulate gradients into the same
// storage a caller sees. Rank 0 is a scalar, rank 1 a vector, rank 2 a
// row-major matrix.
class Tensor {
public:
    Tensor() = default;

    static Tensor scalar(double v);
    static Tensor zeros(const std::vector<std::size_t>& shape);
    static Tensor full(const std::vector<std::size_t>& shape, double v);
    static Tensor from_vector(std::vector<double> v);
    static Tensor from_matrix(std::size_t rows, std::size_t cols, std::vector<double> v);
    static Tensor identity(std::size_t n);

    bool defined() const { return d_ != nullptr; }
    const std::vector<std::size_t>& shape() const;
    std::size_t rank() const;
    std::size_t size() const;
    std::size_t rows() const; // rank-2 only
    std::size_t cols() const; // rank-2 only

    std::vector<double>& values();
    const std::vector<double>& values() const;
    double& at(std::size_t i);
    double at(std::size_t i) const;
    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;
    double item() const; // size-1 tensors only

    bool requires_grad() const;
    Tensor& set_requires_grad(bool v);

    // Gradient slot. grad() lazily materialises a zero gradient of the same
    // shape; has_grad() reports whether anything was ever accumulated.
    bool has_grad() const;
    std::vector<double>& grad();
    const std::vector<double>& grad() const;
    void zero_grad();

    bool same_storage(const Tensor& other) const { return d_ == other.d_; }
    bool all_finite() const;

    // Deep copy of values (fresh storage, no grad, same requires_grad flag).
    Tensor clone() const;

private:
    struct Data {
        std::vector<std::size_t> shape;
        std::vector<double> values;
        std::vector<double> grad; // empty until touched
        bool requires_grad = false;
    };
    std::shared_ptr<Data> d_;

    explicit Tensor(std::shared_ptr<Data> d) : d_(std::move(d)) {}
    Data& data();
    const Data& data() const;

    friend class Tape;
};

// Ordered record of primitive operations. backward() replays it once, in
// reverse, accumulating gradients additively into every requires_grad tensor
// reachable from the loss. Recording can be switched off for pure inference
// passes.
class Tape {
public:
    explicit Tape(bool recording = true) : recording_(recording) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }
    bool recording() const { return recording_; }
    void set_recording(bool v) { recording_ = v; }

    // Number of nodes visited by the most recent backward pass.
    std::size_t last_replay_count() const { return last_replay_count_; }

    void record(std::function<void()> backprop) {
        nodes_.push_back(std::move(backprop));
    }

    // Replays the tape in reverse and clears it. Each node runs exactly once.
    void replay_and_clear() {
        last_replay_count_ = 0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            (*it)();
            ++last_replay_count_;
        }
        nodes_.clear();
    }

private:
    std::vector<std::function<void()>> nodes_;
    bool recording_ = true;
    std::size_t last_replay_count_ = 0;
};

// --- primitive ops -------------------------------------------------------
// Forward values are computed eagerly; when the tape is recording and the
// result requires grad, a closure with the local derivative is pushed.

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

// a[m×k] · b[n×k]^T -> [m×n]; row-dot-row form used by the dense layers.
Tensor matmul_bt(Tape& tape, const Tensor& a, const Tensor& b);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);

Tensor tanh(Tape& tape, const Tensor& x);
Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor exp(Tape& tape, const Tensor& x);
Tensor abs(Tape& tape, const Tensor& x);
Tensor square(Tape& tape, const Tensor& x);

// c * x for a plain constant c.
Tensor scale(Tape& tape, const Tensor& x, double c);
// x + c elementwise.
Tensor add_const(Tape& tape, const Tensor& x, double c);

Tensor sum(Tape& tape, const Tensor& x);  // scalar
Tensor mean(Tape& tape, const Tensor& x); // scalar

// Adds a rank-1 row vector to every row of a rank-2 matrix (bias add). For a
// rank-1 x this is a plain add.
Tensor add_row(Tape& tape, const Tensor& x, const Tensor& row);

// Concatenates along the last axis: two rank-1 vectors, or two rank-2
// matrices with equal row counts.
Tensor concat(Tape& tape, const Tensor& a, const Tensor& b);

// Extracts one row of a rank-2 matrix as a rank-1 vector.
Tensor take_row(Tape& tape, const Tensor& m, std::size_t r);

// Off-tape rank-1 copy of one row of a constant tensor.
Tensor take_row_const(const Tensor& m, std::size_t r);

// Columns [from, to) of a rank-2 matrix, or entries [from, to) of a rank-1
// vector.
Tensor slice_cols(Tape& tape, const Tensor& x, std::size_t from, std::size_t to);

// Same data, new shape (sizes must agree); gradient passes through unchanged.
Tensor reshape(Tape& tape, const Tensor& x, const std::vector<std::size_t>& shape);

// Populates gradients of every requires_grad tensor the loss depends on.
// loss must be scalar; the tape is cleared afterwards.
void backward(const Tensor& loss, Tape& tape);

} // namespace odecast
