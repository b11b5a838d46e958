#include "odecast/tensor.hpp"

#include <cmath>
#include <numeric>

namespace odecast {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw DimensionError(what);
}

} // namespace

Tensor::Data& Tensor::data() {
    if (!d_) throw ContractError("use of undefined tensor");
    return *d_;
}

const Tensor::Data& Tensor::data() const {
    if (!d_) throw ContractError("use of undefined tensor");
    return *d_;
}

Tensor Tensor::scalar(double v) {
    auto d = std::make_shared<Data>();
    d->shape = {};
    d->values = {v};
    return Tensor(std::move(d));
}

Tensor Tensor::zeros(const std::vector<std::size_t>& shape) {
    require(shape.size() <= 2, "tensor rank must be <= 2");
    auto d = std::make_shared<Data>();
    d->shape = shape;
    d->values.assign(shape_product(shape), 0.0);
    return Tensor(std::move(d));
}

Tensor Tensor::full(const std::vector<std::size_t>& shape, double v) {
    Tensor t = zeros(shape);
    for (double& x : t.values()) x = v;
    return t;
}

Tensor Tensor::from_vector(std::vector<double> v) {
    auto d = std::make_shared<Data>();
    d->shape = {v.size()};
    d->values = std::move(v);
    return Tensor(std::move(d));
}

Tensor Tensor::from_matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
    require(rows * cols == v.size(), "matrix data length does not match rows*cols");
    auto d = std::make_shared<Data>();
    d->shape = {rows, cols};
    d->values = std::move(v);
    return Tensor(std::move(d));
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t = zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

const std::vector<std::size_t>& Tensor::shape() const { return data().shape; }
std::size_t Tensor::rank() const { return data().shape.size(); }
std::size_t Tensor::size() const { return data().values.size(); }

std::size_t Tensor::rows() const {
    require(rank() == 2, "rows() needs a rank-2 tensor");
    return data().shape[0];
}

std::size_t Tensor::cols() const {
    require(rank() == 2, "cols() needs a rank-2 tensor");
    return data().shape[1];
}

std::vector<double>& Tensor::values() { return data().values; }
const std::vector<double>& Tensor::values() const { return data().values; }

double& Tensor::at(std::size_t i) { return data().values.at(i); }
double Tensor::at(std::size_t i) const { return data().values.at(i); }

double& Tensor::at(std::size_t r, std::size_t c) {
    return data().values.at(r * cols() + c);
}

double Tensor::at(std::size_t r, std::size_t c) const {
    return data().values.at(r * cols() + c);
}

double Tensor::item() const {
    if (size() != 1) throw ContractError("item() needs a size-1 tensor");
    return data().values[0];
}

bool Tensor::requires_grad() const { return data().requires_grad; }

Tensor& Tensor::set_requires_grad(bool v) {
    data().requires_grad = v;
    return *this;
}

bool Tensor::has_grad() const { return defined() && !data().grad.empty(); }

std::vector<double>& Tensor::grad() {
    Data& d = data();
    if (d.grad.empty()) d.grad.assign(d.values.size(), 0.0);
    return d.grad;
}

const std::vector<double>& Tensor::grad() const {
    if (!has_grad()) throw ContractError("tensor has no gradient");
    return data().grad;
}

void Tensor::zero_grad() {
    Data& d = data();
    d.grad.assign(d.values.size(), 0.0);
}

bool Tensor::all_finite() const {
    for (double v : data().values)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor Tensor::clone() const {
    auto d = std::make_shared<Data>();
    d->shape = data().shape;
    d->values = data().values;
    d->requires_grad = data().requires_grad;
    return Tensor(std::move(d));
}

// --- op helpers ------------------------------------------------------------

namespace {

bool track(const Tape& tape, const Tensor& a) {
    return tape.recording() && a.requires_grad();
}

bool track(const Tape& tape, const Tensor& a, const Tensor& b) {
    return tape.recording() && (a.requires_grad() || b.requires_grad());
}

// Result of an op participates in further differentiation whenever any input
// does; intermediate values therefore inherit requires_grad.
Tensor make_result(std::vector<std::size_t> shape, std::vector<double> vals, bool req) {
    Tensor out;
    if (shape.size() == 2)
        out = Tensor::from_matrix(shape[0], shape[1], std::move(vals));
    else if (shape.size() == 1)
        out = Tensor::from_vector(std::move(vals));
    else
        out = Tensor::scalar(vals[0]);
    out.set_requires_grad(req);
    return out;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": operand shapes differ");
}

} // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw DimensionError("matmul: both operands must be rank-2");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k)
        throw DimensionError("matmul: inner dimensions disagree");

    std::vector<double> out(m * n, 0.0);
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = pa[i * k + kk];
            if (aik == 0.0) continue;
            const double* brow = pb + kk * n;
            double* orow = out.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    }
    Tensor result = make_result({m, n}, std::move(out), track(tape, a, b));

    if (result.requires_grad()) {
        tape.record([a, b, result, m, k, n]() {
            Tensor out_t = result;
            if (!out_t.has_grad()) return;
            const std::vector<double>& go = out_t.grad();
            Tensor at = a, bt = b;
            if (at.requires_grad()) {
                std::vector<double>& ga = at.grad();
                // dA += dOut * B^T
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        const double g = go[i * n + j];
                        if (g == 0.0) continue;
                        const double* brow = bt.values().data();
                        for (std::size_t kk = 0; kk < k; ++kk)
                            ga[i * k + kk] += g * brow[kk * n + j];
                    }
            }
            if (bt.requires_grad()) {
                std::vector<double>& gb = bt.grad();
                // dB += A^T * dOut
                for (std::size_t kk = 0; kk < k; ++kk)
                    for (std::size_t i = 0; i < m; ++i) {
                        const double aik = at.values()[i * k + kk];
                        if (aik == 0.0) continue;
                        const double* grow = go.data() + i * n;
                        double* gbrow = gb.data() + kk * n;
                        for (std::size_t j = 0; j < n; ++j) gbrow[j] += aik * grow[j];
                    }
            }
        });
    }
    return result;
}

Tensor matmul_bt(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw DimensionError("matmul_bt: both operands must be rank-2");
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    if (b.cols() != k)
        throw DimensionError("matmul_bt: inner dimensions disagree");

    std::vector<double> out(m * n, 0.0);
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = pa + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = pb + j * k;
            double acc = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
            out[i * n + j] = acc;
        }
    }
    Tensor result = make_result({m, n}, std::move(out), track(tape, a, b));

    if (result.requires_grad()) {
        tape.record([a, b, result, m, k, n]() {
            Tensor out_t = result;
            if (!out_t.has_grad()) return;
            const std::vector<double>& go = out_t.grad();
            Tensor at = a, bt = b;
            if (at.requires_grad()) {
                std::vector<double>& ga = at.grad();
                // dA[i,:] += sum_j g[i,j] * B[j,:]
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        const double g = go[i * n + j];
                        if (g == 0.0) continue;
                        const double* brow = bt.values().data() + j * k;
                        double* garow = ga.data() + i * k;
                        for (std::size_t kk = 0; kk < k; ++kk) garow[kk] += g * brow[kk];
                    }
            }
            if (bt.requires_grad()) {
                std::vector<double>& gb = bt.grad();
                // dB[j,:] += sum_i g[i,j] * A[i,:]
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        const double g = go[i * n + j];
                        if (g == 0.0) continue;
                        const double* arow = at.values().data() + i * k;
                        double* gbrow = gb.data() + j * k;
                        for (std::size_t kk = 0; kk < k; ++kk) gbrow[kk] += g * arow[kk];
                    }
            }
        });
    }
    return result;
}

namespace {

template <typename Fwd, typename Bwd>
Tensor binary_elementwise(Tape& tape, const Tensor& a, const Tensor& b, const char* name,
                          Fwd fwd, Bwd bwd) {
    check_same_shape(a, b, name);
    const std::size_t n = a.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(a.values()[i], b.values()[i]);
    Tensor result = make_result(a.shape(), std::move(out), track(tape, a, b));
    if (result.requires_grad()) {
        tape.record([a, b, result, bwd, n]() {
            Tensor out_t = result;
            if (!out_t.has_grad()) return;
            const std::vector<double>& go = out_t.grad();
            Tensor at = a, bt = b;
            double* ga = at.requires_grad() ? at.grad().data() : nullptr;
            double* gb = bt.requires_grad() ? bt.grad().data() : nullptr;
            for (std::size_t i = 0; i < n; ++i)
                bwd(go[i], at.values()[i], bt.values()[i], ga ? ga + i : nullptr,
                    gb ? gb + i : nullptr);
        });
    }
    return result;
}

template <typename Fwd, typename Bwd>
Tensor unary_elementwise(Tape& tape, const Tensor& x, Fwd fwd, Bwd bwd) {
    const std::size_t n = x.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(x.values()[i]);
    Tensor result = make_result(x.shape(), std::move(out), track(tape, x));
    if (result.requires_grad()) {
        tape.record([x, result, bwd, n]() {
            Tensor out_t = result;
            if (!out_t.has_grad()) return;
            const std::vector<double>& go = out_t.grad();
            Tensor xt = x;
            std::vector<double>& gx = xt.grad();
            for (std::size_t i = 0; i < n; ++i)
                gx[i] += go[i] * bwd(xt.values()[i], out_t.values()[i]);
        });
    }
    return result;
}

} // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        tape, a, b, "add", [](double x, double y) { return x + y; },
        [](double g, double, double, double* ga, double* gb) {
            if (ga) *ga += g;
            if (gb) *gb += g;
        });
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        tape, a, b, "sub", [](double x, double y) { return x - y; },
        [](double g, double, double, double* ga, double* gb) {
            if (ga) *ga += g;
            if (gb) *gb -= g;
        });
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        tape, a, b, "mul", [](double x, double y) { return x * y; },
        [](double g, double x, double y, double* ga, double* gb) {
            if (ga) *ga += g * y;
            if (gb) *gb += g * x;
        });
}

Tensor tanh(Tape& tape, const Tensor& x) {
    return unary_elementwise(
        tape, x, [](double v) { return std::tanh(v); },
        [](double, double out) { return 1.0 - out * out; });
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
    return unary_elementwise(
        tape, x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double, double out) { return out * (1.0 - out); });
}

Tensor exp(Tape& tape, const Tensor& x) {
    return unary_elementwise(
        tape, x, [](double v) { return std::exp(v); },
        [](double, double out) { return out; });
}

Tensor abs(Tape& tape, const Tensor& x) {
    // subgradient 0 at the kink
    return unary_elementwise(
        tape, x, [](double v) { return std::abs(v); },
        [](double in, double) { return in > 0.0 ? 1.0 : (in < 0.0 ? -1.0 : 0.0); });
}

Tensor square(Tape& tape, const Tensor& x) {
    return unary_elementwise(
        tape, x, [](double v) { return v * v; },
        [](double in, double) { return 2.0 * in; });
}

Tensor scale(Tape& tape, const Tensor& x, double c) {
    return unary_elementwise(
        tape, x, [c](double v) { return c * v; },
        [c](double, double) { return c; });
}

Tensor add_const(Tape& tape, const Tensor& x, double c) {
    return unary_elementwise(
        tape, x, [c](double v) { return v + c; },
        [](double, double) { return 1.0; });
}

Tensor sum(Tape& tape, const Tensor& x) {
    double s = 0.0;
    for (double v : x.values()) s += v;
    Tensor result = Tensor::scalar(s);
    result.set_requires_grad(track(tape, x));
    if (result.requires_grad()) {
        tape.record([x, result]() {
            Tensor out_t = result;
            if (!out_t.has_grad()) return;
            const double g = out_t.grad()[0];
            Tensor xt = x;
            for (double& gi : xt.grad()) gi += g;
        });
    }
    return result;
}

Tensor mean(Tape& tape, const Tensor& x) {
    const std::size_t n = x.size();
    if (n == 0) throw ContractError("mean of empty tensor");
    double s = 0.0;
    for (double v : x.values()) s += v;
    Tensor result = Tensor::scalar(s / static_cast<double>(n));
    result.set_requires_grad(track(tape, x));
    if (result.requires_grad()) {
        tape.record([x, result, n]() {
            Tensor out_t = result;
            if (!out_t.has_grad()) return;
            const double g = out_t.grad()[0] / static_cast<double>(n);
            Tensor xt = x;
            for (double& gi : xt.grad()) gi += g;
        });
    }
    return result;
}

Tensor add_row(Tape& tape, const Tensor& x, const Tensor& row) {
    if (row.rank() != 1) throw DimensionError("add_row: bias must be rank-1");
    if (x.rank() == 1) return add(tape, x, row);
    if (x.rank() != 2 || x.cols() != row.size())
        throw DimensionError("add_row: column count must match bias length");
    const std::size_t m = x.rows(), n = x.cols();
    std::vector<double> out(x.values());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] += row.values()[j];
    Tensor result = make_result({m, n}, std::move(out), track(tape, x, row));
    if (result.requires_grad()) {
        tape.record([x, row, result, m, n]() {
            Tensor out_t = result;
            if (!out_t.has_grad()) return;
            const std::vector<double>& go = out_t.grad();
            Tensor xt = x, rt = row;
            if (xt.requires_grad()) {
                std::vector<double>& gx = xt.grad();
                for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i];
            }
            if (rt.requires_grad()) {
                std::vector<double>& gr = rt.grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gr[j] += go[i * n + j];
            }
        });
    }
    return result;
}

Tensor concat(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.rank() == 1 && b.rank() == 1) {
        std::vector<double> out;
        out.reserve(a.size() + b.size());
        out.insert(out.end(), a.values().begin(), a.values().end());
        out.insert(out.end(), b.values().begin(), b.values().end());
        Tensor result = make_result({a.size() + b.size()}, std::move(out), track(tape, a, b));
        if (result.requires_grad()) {
            const std::size_t na = a.size(), nb = b.size();
            tape.record([a, b, result, na, nb]() {
                Tensor out_t = result;
                if (!out_t.has_grad()) return;
                const std::vector<double>& go = out_t.grad();
                Tensor at = a, bt = b;
                if (at.requires_grad())
                    for (std::size_t i = 0; i < na; ++i) at.grad()[i] += go[i];
                if (bt.requires_grad())
                    for (std::size_t i = 0; i < nb; ++i) bt.grad()[i] += go[na + i];
            });
        }
        return result;
    }
    if (a.rank() == 2 && b.rank() == 2) {
        if (a.rows() != b.rows())
            throw DimensionError("concat: row counts differ");
        const std::size_t m = a.rows(), na = a.cols(), nb = b.cols();
        std::vector<double> out(m * (na + nb));
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < na; ++j) out[i * (na + nb) + j] = a.at(i, j);
            for (std::size_t j = 0; j < nb; ++j) out[i * (na + nb) + na + j] = b.at(i, j);
        }
        Tensor result = make_result({m, na + nb}, std::move(out), track(tape, a, b));
        if (result.requires_grad()) {
            tape.record([a, b, result, m, na, nb]() {
                Tensor out_t = result;
                if (!out_t.has_grad()) return;
                const std::vector<double>& go = out_t.grad();
                Tensor at = a, bt = b;
                for (std::size_t i = 0; i < m; ++i) {
                    if (at.requires_grad())
                        for (std::size_t j = 0; j < na; ++j)
                            at.grad()[i * na + j] += go[i * (na + nb) + j];
                    if (bt.requires_grad())
                        for (std::size_t j = 0; j < nb; ++j)
                            bt.grad()[i * nb + j] += go[i * (na + nb) + na + j];
                }
            });
        }
        return result;
    }
    throw DimensionError("concat: operands must both be rank-1 or both rank-2");
}

Tensor take_row(Tape& tape, const Tensor& m, std::size_t r) {
    if (m.rank() != 2) throw DimensionError("take_row: needs a rank-2 tensor");
    if (r >= m.rows()) throw DimensionError("take_row: row index out of range");
    const std::size_t n = m.cols();
    std::vector<double> out(m.values().begin() + r * n, m.values().begin() + (r + 1) * n);
    Tensor result = make_result({n}, std::move(out), track(tape, m));
    if (result.requires_grad()) {
        tape.record([m, result, r, n]() {
            Tensor out_t = result;
            if (!out_t.has_grad()) return;
            const std::vector<double>& go = out_t.grad();
            Tensor mt = m;
            std::vector<double>& gm = mt.grad();
            for (std::size_t j = 0; j < n; ++j) gm[r * n + j] += go[j];
        });
    }
    return result;
}

Tensor take_row_const(const Tensor& m, std::size_t r) {
    if (m.rank() != 2) throw DimensionError("take_row_const: needs a rank-2 tensor");
    if (r >= m.rows()) throw DimensionError("take_row_const: row index out of range");
    std::vector<double> row(m.values().begin() + r * m.cols(),
                            m.values().begin() + (r + 1) * m.cols());
    return Tensor::from_vector(std::move(row));
}

Tensor slice_cols(Tape& tape, const Tensor& x, std::size_t from, std::size_t to) {
    if (from >= to) throw DimensionError("slice_cols: empty range");
    if (x.rank() == 1) {
        if (to > x.size()) throw DimensionError("slice_cols: range out of bounds");
        std::vector<double> out(x.values().begin() + from, x.values().begin() + to);
        Tensor result = make_result({to - from}, std::move(out), track(tape, x));
        if (result.requires_grad()) {
            tape.record([x, result, from, to]() {
                Tensor out_t = result;
                if (!out_t.has_grad()) return;
                const std::vector<double>& go = out_t.grad();
                Tensor xt = x;
                std::vector<double>& gx = xt.grad();
                for (std::size_t i = from; i < to; ++i) gx[i] += go[i - from];
            });
        }
        return result;
    }
    if (x.rank() != 2 || to > x.cols())
        throw DimensionError("slice_cols: range out of bounds");
    const std::size_t m = x.rows(), n = x.cols(), w = to - from;
    std::vector<double> out(m * w);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) out[i * w + j] = x.values()[i * n + from + j];
    Tensor result = make_result({m, w}, std::move(out), track(tape, x));
    if (result.requires_grad()) {
        tape.record([x, result, from, m, n, w]() {
            Tensor out_t = result;
            if (!out_t.has_grad()) return;
            const std::vector<double>& go = out_t.grad();
            Tensor xt = x;
            std::vector<double>& gx = xt.grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < w; ++j) gx[i * n + from + j] += go[i * w + j];
        });
    }
    return result;
}

Tensor reshape(Tape& tape, const Tensor& x, const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    if (n != x.size()) throw DimensionError("reshape: element count changes");
    Tensor result = make_result(shape, x.values(), track(tape, x));
    if (result.requires_grad()) {
        tape.record([x, result]() {
            Tensor out_t = result;
            if (!out_t.has_grad()) return;
            const std::vector<double>& go = out_t.grad();
            Tensor xt = x;
            std::vector<double>& gx = xt.grad();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i];
        });
    }
    return result;
}

void backward(const Tensor& loss, Tape& tape) {
    if (loss.size() != 1)
        throw ContractError("backward: loss must be scalar");
    Tensor l = loss;
    l.grad()[0] += 1.0;
    tape.replay_and_clear();
}

} // namespace odecast
