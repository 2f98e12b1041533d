#pragma once

// Residual multilayer perceptron g_theta and the shifted gain surrogate
//   h_theta(t, x) = g_theta(x) - g_s(t)
// approximating the gradient of the estimation value function. Hidden layers
// compute sigma(W_i z + b_i) + R_i z with the logistic activation; the output
// layer is a plain matrix W_L. Input and parameter Jacobians are assembled
// analytically (no autodiff framework at these sizes).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "moen/csv.hpp"
#include "moen/errors.hpp"
#include "moen/numerics.hpp"
#include "moen/rng.hpp"

namespace moen {

/// Layer widths [n0, ..., nL]. nL is the state dimension n; n0 is n, or n+1
/// when the network receives time as an extra leading input.
struct NetworkShape {
    std::vector<int> dims;
    bool time_input = false;

    int layer_count() const { return static_cast<int>(dims.size()) - 1; }  // L
    int input_dim() const { return dims.front(); }
    int output_dim() const { return dims.back(); }
    int state_dim() const { return output_dim(); }

    /// N = nL n_{L-1} + sum_{i=1}^{L-1} (2 n_{i-1} + 1) n_i
    int param_count() const {
        const int L = layer_count();
        int n = dims[L] * dims[L - 1];
        for (int i = 1; i <= L - 1; ++i) n += (2 * dims[i - 1] + 1) * dims[i];
        return n;
    }

    void validate() const {
        if (dims.size() < 3) throw ConfigError("network: at least two layers required");
        for (int d : dims)
            if (d < 1) throw ConfigError("network: layer widths must be positive");
        const int expected_n0 = output_dim() + (time_input ? 1 : 0);
        if (input_dim() != expected_n0)
            throw ConfigError("network: input width must be " + std::to_string(expected_n0) +
                              " for this output width");
    }

    bool operator==(const NetworkShape& o) const {
        return dims == o.dims && time_input == o.time_input;
    }
};

/// Network parameters (W_1, b_1, R_1, ..., W_{L-1}, b_{L-1}, R_{L-1}, W_L)
/// with a deterministic two-way mapping to a flat vector of length N.
struct Theta {
    NetworkShape shape;
    std::vector<Mat> W;  // L entries; W[L-1] is the output layer
    std::vector<Vec> b;  // L-1 entries
    std::vector<Mat> R;  // L-1 entries

    static Theta zeros(const NetworkShape& shape) {
        shape.validate();
        Theta th;
        th.shape = shape;
        const int L = shape.layer_count();
        for (int i = 1; i <= L - 1; ++i) {
            th.W.emplace_back(shape.dims[i], shape.dims[i - 1]);
            th.b.emplace_back(shape.dims[i]);
            th.R.emplace_back(shape.dims[i], shape.dims[i - 1]);
        }
        th.W.emplace_back(shape.dims[L], shape.dims[L - 1]);
        return th;
    }

    /// Flat ordering: W_1 row-major, b_1, R_1 row-major, ..., W_L row-major.
    Vec flatten() const {
        Vec flat(shape.param_count());
        std::size_t pos = 0;
        auto put_mat = [&](const Mat& m) {
            for (std::size_t i = 0; i < m.rows(); ++i)
                for (std::size_t j = 0; j < m.cols(); ++j) flat[pos++] = m(i, j);
        };
        const int L = shape.layer_count();
        for (int i = 0; i < L - 1; ++i) {
            put_mat(W[i]);
            for (std::size_t k = 0; k < b[i].size(); ++k) flat[pos++] = b[i][k];
            put_mat(R[i]);
        }
        put_mat(W[L - 1]);
        return flat;
    }

    static Theta unflatten(const NetworkShape& shape, const Vec& flat) {
        if (static_cast<int>(flat.size()) != shape.param_count())
            throw DimensionError("Theta::unflatten: expected " +
                                 std::to_string(shape.param_count()) + " values, got " +
                                 std::to_string(flat.size()));
        Theta th = zeros(shape);
        std::size_t pos = 0;
        auto get_mat = [&](Mat& m) {
            for (std::size_t i = 0; i < m.rows(); ++i)
                for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = flat[pos++];
        };
        const int L = shape.layer_count();
        for (int i = 0; i < L - 1; ++i) {
            get_mat(th.W[i]);
            for (std::size_t k = 0; k < th.b[i].size(); ++k) th.b[i][k] = flat[pos++];
            get_mat(th.R[i]);
        }
        get_mat(th.W[L - 1]);
        return th;
    }

    bool finite() const {
        for (const Mat& m : W)
            if (!m.finite()) return false;
        for (const Vec& v : b)
            if (!v.finite()) return false;
        for (const Mat& m : R)
            if (!m.finite()) return false;
        return true;
    }
};

/// Time-only shift g_s: either identically zero or a trajectory sampled on
/// the training grid, evaluated by linear interpolation.
class ShiftFunction {
public:
    static ShiftFunction zero(int dim) {
        ShiftFunction s;
        s.dim_ = dim;
        return s;
    }
    static ShiftFunction sampled(GridTrajectory samples) {
        ShiftFunction s;
        s.dim_ = static_cast<int>(samples.dim());
        s.samples_ = std::move(samples);
        return s;
    }

    bool is_zero() const { return !samples_.has_value(); }
    int dim() const { return dim_; }

    Vec eval(double t) const {
        if (samples_) return samples_->eval_at(t);
        return Vec(dim_);
    }

    const GridTrajectory* samples() const { return samples_ ? &*samples_ : nullptr; }

private:
    int dim_ = 0;
    std::optional<GridTrajectory> samples_;
};

namespace detail {

inline double logistic(double s) { return 1.0 / (1.0 + std::exp(-s)); }

struct ForwardTrace {
    std::vector<Vec> activations;  // a_0 = z, a_1, ..., a_{L-1}
    std::vector<Vec> preacts;      // W_i a_{i-1} + b_i for hidden layers
};

inline Vec forward_trace(const Theta& th, const Vec& z, ForwardTrace* trace) {
    if (static_cast<int>(z.size()) != th.shape.input_dim())
        throw DimensionError("network forward: input size " + std::to_string(z.size()) +
                             ", expected " + std::to_string(th.shape.input_dim()));
    const int L = th.shape.layer_count();
    Vec a = z;
    if (trace) trace->activations.push_back(a);
    for (int i = 0; i < L - 1; ++i) {
        Vec pre = th.W[i] * a + th.b[i];
        Vec next = th.R[i] * a;
        for (std::size_t k = 0; k < next.size(); ++k) next[k] += logistic(pre[k]);
        if (trace) {
            trace->preacts.push_back(std::move(pre));
            trace->activations.push_back(next);
        }
        a = std::move(next);
    }
    return th.W[L - 1] * a;
}

inline Mat outer(const Vec& u, const Vec& v) {
    Mat m(u.size(), v.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = u[i] * v[j];
    return m;
}

}  // namespace detail

/// Raw network evaluation g_theta(z).
inline Vec forward(const Theta& th, const Vec& z) {
    return detail::forward_trace(th, z, nullptr);
}

/// Builds the network input for state x at time t ((t, x) when the shape
/// takes time, otherwise x alone).
inline Vec network_input(const NetworkShape& shape, double t, const Vec& x) {
    if (static_cast<int>(x.size()) != shape.state_dim())
        throw DimensionError("network_input: state dimension mismatch");
    if (!shape.time_input) return x;
    Vec z(x.size() + 1);
    z[0] = t;
    for (std::size_t i = 0; i < x.size(); ++i) z[i + 1] = x[i];
    return z;
}

/// h_theta(t, x) = g_theta(t, x) - g_s(t).
inline Vec h_eval(const Theta& th, double t, const Vec& x, const ShiftFunction& shift) {
    Vec g = forward(th, network_input(th.shape, t, x));
    if (!shift.is_zero()) g -= shift.eval(t);
    else if (shift.dim() != 0 && shift.dim() != static_cast<int>(g.size()))
        throw DimensionError("h_eval: shift dimension mismatch");
    return g;
}

/// Exact Jacobian D_x h_theta(t, x) by the chain rule; the time-only shift
/// contributes nothing. For hidden layers the per-layer factor is
/// diag(sigma'(W_i a + b_i)) W_i + R_i.
inline Mat input_jacobian(const Theta& th, double t, const Vec& x, const ShiftFunction& shift) {
    (void)shift;  // g_s depends on t only
    detail::ForwardTrace trace;
    detail::forward_trace(th, network_input(th.shape, t, x), &trace);
    const int L = th.shape.layer_count();

    Mat acc = Mat::identity(th.shape.input_dim());
    for (int i = 0; i < L - 1; ++i) {
        Mat layer = th.R[i];
        const Vec& pre = trace.preacts[i];
        for (std::size_t row = 0; row < layer.rows(); ++row) {
            const double s = detail::logistic(pre[row]);
            const double sp = s * (1.0 - s);
            for (std::size_t col = 0; col < layer.cols(); ++col)
                layer(row, col) += sp * th.W[i](row, col);
        }
        acc = layer * acc;
    }
    Mat full = th.W[L - 1] * acc;
    if (!th.shape.time_input) return full;
    // Drop the time column.
    Mat dx(full.rows(), full.cols() - 1);
    for (std::size_t i = 0; i < dx.rows(); ++i)
        for (std::size_t j = 0; j < dx.cols(); ++j) dx(i, j) = full(i, j + 1);
    return dx;
}

/// Reverse-mode accumulation of u^T D_theta h_theta(t, x), returned in the
/// flat parameter ordering. The shift blocks are parameter-free.
inline Vec param_vjp(const Theta& th, double t, const Vec& x, const ShiftFunction& shift,
                     const Vec& u) {
    (void)shift;
    if (static_cast<int>(u.size()) != th.shape.output_dim())
        throw DimensionError("param_vjp: cotangent dimension mismatch");
    detail::ForwardTrace trace;
    detail::forward_trace(th, network_input(th.shape, t, x), &trace);
    const int L = th.shape.layer_count();

    std::vector<Mat> gW(L);
    std::vector<Vec> gb(L - 1);
    std::vector<Mat> gR(L - 1);

    // Output layer: out = W_L a_{L-1}.
    gW[L - 1] = detail::outer(u, trace.activations[L - 1]);
    Vec delta = th.W[L - 1].transpose() * u;

    for (int i = L - 2; i >= 0; --i) {
        const Vec& pre = trace.preacts[i];
        Vec s(delta.size());
        for (std::size_t k = 0; k < s.size(); ++k) {
            const double sig = detail::logistic(pre[k]);
            s[k] = delta[k] * sig * (1.0 - sig);
        }
        gW[i] = detail::outer(s, trace.activations[i]);
        gb[i] = s;
        gR[i] = detail::outer(delta, trace.activations[i]);
        delta = th.W[i].transpose() * s + th.R[i].transpose() * delta;
    }

    Vec flat(th.shape.param_count());
    std::size_t pos = 0;
    auto put_mat = [&](const Mat& m) {
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j) flat[pos++] = m(i, j);
    };
    for (int i = 0; i < L - 1; ++i) {
        put_mat(gW[i]);
        for (std::size_t k = 0; k < gb[i].size(); ++k) flat[pos++] = gb[i][k];
        put_mat(gR[i]);
    }
    put_mat(gW[L - 1]);
    return flat;
}

/// Seeded initialization: W_i, b_i and W_L uniform in [-scale, scale],
/// residual matrices R_i identity on the leading square block.
inline Theta init_params(const NetworkShape& shape, std::uint64_t seed, double scale) {
    if (scale < 0.0) throw ConfigError("init_params: scale must be non-negative");
    Theta th = Theta::zeros(shape);
    Rng rng(seed);
    auto fill_mat = [&](Mat& m) {
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-scale, scale);
    };
    const int L = shape.layer_count();
    for (int i = 0; i < L - 1; ++i) {
        fill_mat(th.W[i]);
        for (std::size_t k = 0; k < th.b[i].size(); ++k) th.b[i][k] = rng.uniform(-scale, scale);
        for (std::size_t d = 0; d < std::min(th.R[i].rows(), th.R[i].cols()); ++d)
            th.R[i](d, d) = 1.0;
    }
    fill_mat(th.W[L - 1]);
    return th;
}

// =============================================================================
// Serialization: flat CSV (one value per line, `theta_N=<N>` header) plus a
// `.shape` sidecar with the layer widths. 17-significant-digit decimals give
// a bit-exact round-trip.
// =============================================================================

inline std::filesystem::path theta_sidecar_path(const std::filesystem::path& theta_path) {
    return std::filesystem::path(theta_path.string() + ".shape");
}

inline void save_theta(const std::filesystem::path& path, const Theta& th) {
    const Vec flat = th.flatten();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << "theta_N=" << flat.size() << '\n';
    for (double v : flat) out << format_g17(v) << '\n';
    if (!out) throw IoError("write failed for '" + path.string() + "'");

    std::ofstream side(theta_sidecar_path(path), std::ios::binary);
    if (!side) throw IoError("cannot open theta sidecar for writing");
    side << "dims=";
    for (std::size_t i = 0; i < th.shape.dims.size(); ++i)
        side << (i ? " " : "") << th.shape.dims[i];
    side << '\n';
    side << "time_input=" << (th.shape.time_input ? 1 : 0) << '\n';
}

inline Theta load_theta(const std::filesystem::path& path) {
    std::ifstream side(theta_sidecar_path(path), std::ios::binary);
    if (!side) throw IoError("cannot open theta sidecar '" +
                             theta_sidecar_path(path).string() + "'");
    NetworkShape shape;
    std::string line;
    while (std::getline(side, line)) {
        if (line.rfind("dims=", 0) == 0) {
            std::stringstream ss(line.substr(5));
            int d;
            while (ss >> d) shape.dims.push_back(d);
        } else if (line.rfind("time_input=", 0) == 0) {
            shape.time_input = line.substr(11) == "1";
        } else if (!line.empty()) {
            throw ConfigError("theta sidecar: unknown line '" + line + "'");
        }
    }
    shape.validate();

    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    if (!std::getline(in, line) || line.rfind("theta_N=", 0) != 0)
        throw ConfigError("theta file: missing theta_N header");
    const int n_declared = std::stoi(line.substr(8));
    if (n_declared != shape.param_count())
        throw ConfigError("theta file: header N=" + std::to_string(n_declared) +
                          " does not match sidecar shape N=" +
                          std::to_string(shape.param_count()));
    Vec flat(n_declared);
    for (int i = 0; i < n_declared; ++i) {
        if (!std::getline(in, line))
            throw ConfigError("theta file: expected " + std::to_string(n_declared) +
                              " values, found " + std::to_string(i));
        flat[i] = parse_double(line);
    }
    return Theta::unflatten(shape, flat);
}

}  // namespace moen
