#pragma once

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gerber_shiu/error.hpp"

namespace gerber_shiu {

/// Fully connected tanh network R -> R. Parameters live in one flat vector:
/// for each layer, the weight matrix row-major (out x in), then the bias.
class MLPParams {
public:
    MLPParams() = default;

    explicit MLPParams(std::vector<int> layer_sizes) : layer_sizes_(std::move(layer_sizes)) {
        if (layer_sizes_.size() < 3) fail(ErrorKind::config, "network needs at least one hidden layer");
        if (layer_sizes_.front() != 1 || layer_sizes_.back() != 1) {
            fail(ErrorKind::config, "network input and output dimension must be 1");
        }
        std::size_t offset = 0;
        for (std::size_t l = 1; l < layer_sizes_.size(); ++l) {
            if (layer_sizes_[l] < 1) fail(ErrorKind::config, "layer sizes must be positive");
            weight_offset_.push_back(offset);
            offset += static_cast<std::size_t>(layer_sizes_[l]) * layer_sizes_[l - 1];
            bias_offset_.push_back(offset);
            offset += layer_sizes_[l];
        }
        theta_.assign(offset, 0.0);
    }

    static MLPParams unpack(std::vector<int> layer_sizes, std::span<const double> flat) {
        MLPParams p(std::move(layer_sizes));
        if (flat.size() != p.theta_.size()) fail(ErrorKind::config, "parameter vector has the wrong length");
        p.theta_.assign(flat.begin(), flat.end());
        return p;
    }

    std::vector<double> pack() const { return theta_; }

    const std::vector<int>& layer_sizes() const { return layer_sizes_; }
    std::size_t num_layers() const { return layer_sizes_.size() - 1; }  // weight layers
    std::size_t size() const { return theta_.size(); }

    std::span<double> flat() { return theta_; }
    std::span<const double> flat() const { return theta_; }

    /// Layer l in [0, num_layers()): maps layer_sizes[l] -> layer_sizes[l + 1].
    double& weight(std::size_t l, std::size_t i, std::size_t j) {
        return theta_[weight_offset_[l] + i * layer_sizes_[l] + j];
    }
    double weight(std::size_t l, std::size_t i, std::size_t j) const {
        return theta_[weight_offset_[l] + i * layer_sizes_[l] + j];
    }
    double& bias(std::size_t l, std::size_t i) { return theta_[bias_offset_[l] + i]; }
    double bias(std::size_t l, std::size_t i) const { return theta_[bias_offset_[l] + i]; }

    std::size_t weight_offset(std::size_t l) const { return weight_offset_[l]; }
    std::size_t bias_offset(std::size_t l) const { return bias_offset_[l]; }

private:
    std::vector<int> layer_sizes_;
    std::vector<std::size_t> weight_offset_;
    std::vector<std::size_t> bias_offset_;
    std::vector<double> theta_;
};

inline std::size_t parameter_count(const std::vector<int>& layer_sizes) { return MLPParams(layer_sizes).size(); }

/// Glorot-uniform weights, zero biases; reproducible from the seed.
inline MLPParams init(const std::vector<int>& layer_sizes, std::uint64_t seed) {
    MLPParams p(layer_sizes);
    std::mt19937_64 gen(seed);
    for (std::size_t l = 0; l < p.num_layers(); ++l) {
        const int fan_in = layer_sizes[l];
        const int fan_out = layer_sizes[l + 1];
        const double g = std::sqrt(6.0 / (fan_in + fan_out));
        for (int i = 0; i < fan_out; ++i) {
            for (int j = 0; j < fan_in; ++j) {
                const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
                p.weight(l, i, j) = g * (2.0 * u - 1.0);
            }
        }
    }
    return p;
}

/// Scratch space for batched evaluation. Activations are stored point-major
/// (point p, neuron i at [p * width + i]) so every inner loop is a contiguous axpy
/// and the summation order for a point does not depend on the batch size.
struct BatchWorkspace {
    std::size_t points = 0;
    bool tangent = false;
    std::vector<std::vector<double>> act;   // a_l, l = 0..L-1 (a_0 = x)
    std::vector<std::vector<double>> dact;  // input-tangent of a_l
    std::vector<std::vector<double>> dpre;  // input-tangent of the pre-activation, hidden layers
    std::vector<double> adj_a, adj_da, adj_a_next, adj_da_next, adj_z, adj_dz;
    std::vector<double> wt;  // transposed weights of the current layer
};

namespace detail {

inline void check_finite_outputs(std::span<const double> xs, std::span<const double> values) {
    for (std::size_t p = 0; p < values.size(); ++p) {
        if (!std::isfinite(values[p])) {
            std::ostringstream os;
            os.precision(17);
            os << "network output is not finite at x = " << xs[p];
            fail(ErrorKind::numeric, os.str());
        }
    }
}

// Elementwise tanh, accurate to a few ulp, written so the loop vectorizes.
// tanh|x| = -m / (m + 2) with m = expm1(-2|x|); expm1 via 2^n * (1 + p(r)) - 1.
inline void tanh_inplace(double* v, std::size_t n) {
    constexpr double inv_ln2 = 1.4426950408889634;
    constexpr double ln2_hi = 6.93147180369123816490e-01;
    constexpr double ln2_lo = 1.90821492927058770002e-10;
    constexpr double round_magic = 0x1.8p52;
    for (std::size_t k = 0; k < n; ++k) {
        const double x = v[k];
        double y = -2.0 * std::fabs(x);
        y = y < -40.0 ? -40.0 : y;
        const double nf = (y * inv_ln2 + round_magic) - round_magic;
        const double r = (y - nf * ln2_hi) - nf * ln2_lo;
        double p = 1.0 / 6227020800.0;
        p = p * r + 1.0 / 479001600.0;
        p = p * r + 1.0 / 39916800.0;
        p = p * r + 1.0 / 3628800.0;
        p = p * r + 1.0 / 362880.0;
        p = p * r + 1.0 / 40320.0;
        p = p * r + 1.0 / 5040.0;
        p = p * r + 1.0 / 720.0;
        p = p * r + 1.0 / 120.0;
        p = p * r + 1.0 / 24.0;
        p = p * r + 1.0 / 6.0;
        p = p * r + 0.5;
        p = p * r * r + r;
        const auto biased = static_cast<std::int64_t>(nf) + 1023;
        const double scale = std::bit_cast<double>(static_cast<std::uint64_t>(biased) << 52);
        const double m = scale * p + (scale - 1.0);
        v[k] = std::copysign(-m / (m + 2.0), x);
    }
}

}  // namespace detail

/// Evaluates the network (and, when with_tangent, its input derivative) at every x.
inline void forward_batch(const MLPParams& params, std::span<const double> xs, bool with_tangent, BatchWorkspace& ws,
                          std::span<double> value, std::span<double> deriv) {
    const auto& sizes = params.layer_sizes();
    const std::size_t L = params.num_layers();
    const std::size_t P = xs.size();
    ws.points = P;
    ws.tangent = with_tangent;
    ws.act.resize(L);
    ws.dact.resize(L);
    ws.dpre.resize(L);
    ws.act[0].assign(xs.begin(), xs.end());
    if (with_tangent) ws.dact[0].assign(P, 1.0);

    for (std::size_t l = 1; l < L; ++l) {
        const std::size_t in = sizes[l - 1];
        const std::size_t out = sizes[l];
        const double* W = params.flat().data() + params.weight_offset(l - 1);
        const double* b = params.flat().data() + params.bias_offset(l - 1);
        auto& a = ws.act[l];
        a.resize(P * out);
        ws.wt.resize(in * out);
        for (std::size_t i = 0; i < out; ++i) {
            for (std::size_t j = 0; j < in; ++j) ws.wt[j * out + i] = W[i * in + j];
        }
        const double* Wt = ws.wt.data();
        const double* prev = ws.act[l - 1].data();
        for (std::size_t p = 0; p < P; ++p) {
            double* z = a.data() + p * out;
            for (std::size_t i = 0; i < out; ++i) z[i] = b[i];
            const double* ap = prev + p * in;
            for (std::size_t j = 0; j < in; ++j) {
                const double aj = ap[j];
                const double* col = Wt + j * out;
                for (std::size_t i = 0; i < out; ++i) z[i] += col[i] * aj;
            }
        }
        if (with_tangent) {
            auto& dz = ws.dpre[l];
            dz.assign(P * out, 0.0);
            const double* dprev = ws.dact[l - 1].data();
            for (std::size_t p = 0; p < P; ++p) {
                double* dzp = dz.data() + p * out;
                const double* dap = dprev + p * in;
                for (std::size_t j = 0; j < in; ++j) {
                    const double daj = dap[j];
                    const double* col = Wt + j * out;
                    for (std::size_t i = 0; i < out; ++i) dzp[i] += col[i] * daj;
                }
            }
        }
        detail::tanh_inplace(a.data(), a.size());
        if (with_tangent) {
            auto& da = ws.dact[l];
            da.resize(P * out);
            const auto& dz = ws.dpre[l];
            for (std::size_t k = 0; k < P * out; ++k) da[k] = (1.0 - a[k] * a[k]) * dz[k];
        }
    }

    const std::size_t in = sizes[L - 1];
    const double* W = params.flat().data() + params.weight_offset(L - 1);
    const double bout = params.bias(L - 1, 0);
    const double* last = ws.act[L - 1].data();
    for (std::size_t p = 0; p < P; ++p) {
        double y = bout;
        for (std::size_t j = 0; j < in; ++j) y += W[j] * last[p * in + j];
        value[p] = y;
    }
    if (with_tangent) {
        const double* dlast = ws.dact[L - 1].data();
        for (std::size_t p = 0; p < P; ++p) {
            double dy = 0.0;
            for (std::size_t j = 0; j < in; ++j) dy += W[j] * dlast[p * in + j];
            deriv[p] = dy;
        }
    }
}

/// Reverse pass through the last forward_batch: accumulates into grad the
/// parameter gradient of sum_p value_adj[p] * N(x_p) + deriv_adj[p] * N'(x_p).
inline void backward_batch(const MLPParams& params, BatchWorkspace& ws, std::span<const double> value_adj,
                           std::span<const double> deriv_adj, std::span<double> grad) {
    const auto& sizes = params.layer_sizes();
    const std::size_t L = params.num_layers();
    const std::size_t P = ws.points;
    const bool tan = ws.tangent;

    // Output layer.
    {
        const std::size_t in = sizes[L - 1];
        const double* W = params.flat().data() + params.weight_offset(L - 1);
        double* gW = grad.data() + params.weight_offset(L - 1);
        double& gb = grad[params.bias_offset(L - 1)];
        const double* a = ws.act[L - 1].data();
        ws.adj_a.assign(P * in, 0.0);
        if (tan) ws.adj_da.assign(P * in, 0.0);
        for (std::size_t p = 0; p < P; ++p) {
            const double ya = value_adj[p];
            gb += ya;
            for (std::size_t j = 0; j < in; ++j) {
                gW[j] += ya * a[p * in + j];
                ws.adj_a[p * in + j] = W[j] * ya;
            }
            if (tan) {
                const double yd = deriv_adj[p];
                const double* da = ws.dact[L - 1].data();
                for (std::size_t j = 0; j < in; ++j) {
                    gW[j] += yd * da[p * in + j];
                    ws.adj_da[p * in + j] = W[j] * yd;
                }
            }
        }
    }

    for (std::size_t l = L - 1; l >= 1; --l) {
        const std::size_t in = sizes[l - 1];
        const std::size_t out = sizes[l];
        const double* W = params.flat().data() + params.weight_offset(l - 1);
        double* gW = grad.data() + params.weight_offset(l - 1);
        double* gb = grad.data() + params.bias_offset(l - 1);
        const auto& a = ws.act[l];
        ws.adj_z.resize(P * out);
        if (tan) ws.adj_dz.resize(P * out);
        for (std::size_t k = 0; k < P * out; ++k) {
            const double s = 1.0 - a[k] * a[k];
            double zbar = s * ws.adj_a[k];
            if (tan) {
                // da = s * dz, s = 1 - a^2, ds/dz = -2 a s
                ws.adj_dz[k] = s * ws.adj_da[k];
                zbar -= 2.0 * a[k] * s * ws.adj_da[k] * ws.dpre[l][k];
            }
            ws.adj_z[k] = zbar;
        }
        const double* prev = ws.act[l - 1].data();
        const double* dprev = tan ? ws.dact[l - 1].data() : nullptr;
        for (std::size_t p = 0; p < P; ++p) {
            const double* zb = ws.adj_z.data() + p * out;
            for (std::size_t i = 0; i < out; ++i) gb[i] += zb[i];
            for (std::size_t i = 0; i < out; ++i) {
                double* row = gW + i * in;
                const double* ap = prev + p * in;
                const double zi = zb[i];
                for (std::size_t j = 0; j < in; ++j) row[j] += zi * ap[j];
            }
            if (tan) {
                const double* dzb = ws.adj_dz.data() + p * out;
                for (std::size_t i = 0; i < out; ++i) {
                    double* row = gW + i * in;
                    const double* dap = dprev + p * in;
                    const double dzi = dzb[i];
                    for (std::size_t j = 0; j < in; ++j) row[j] += dzi * dap[j];
                }
            }
        }
        if (l == 1) break;
        ws.adj_a_next.assign(P * in, 0.0);
        if (tan) ws.adj_da_next.assign(P * in, 0.0);
        for (std::size_t p = 0; p < P; ++p) {
            double* an = ws.adj_a_next.data() + p * in;
            const double* zb = ws.adj_z.data() + p * out;
            for (std::size_t i = 0; i < out; ++i) {
                const double zi = zb[i];
                for (std::size_t j = 0; j < in; ++j) an[j] += W[i * in + j] * zi;
            }
            if (tan) {
                double* dan = ws.adj_da_next.data() + p * in;
                const double* dzb = ws.adj_dz.data() + p * out;
                for (std::size_t i = 0; i < out; ++i) {
                    const double dzi = dzb[i];
                    for (std::size_t j = 0; j < in; ++j) dan[j] += W[i * in + j] * dzi;
                }
            }
        }
        std::swap(ws.adj_a, ws.adj_a_next);
        if (tan) std::swap(ws.adj_da, ws.adj_da_next);
    }
}

inline double forward(const MLPParams& params, double x) {
    BatchWorkspace ws;
    double value = 0.0;
    forward_batch(params, std::span<const double>(&x, 1), false, ws, std::span<double>(&value, 1), {});
    return value;
}

inline std::pair<double, double> forward_with_input_derivative(const MLPParams& params, double x) {
    BatchWorkspace ws;
    double value = 0.0;
    double deriv = 0.0;
    forward_batch(params, std::span<const double>(&x, 1), true, ws, std::span<double>(&value, 1),
                  std::span<double>(&deriv, 1));
    return {value, deriv};
}

/// Network outputs at two fixed point sets: plain values, and values with input derivatives.
struct NetworkOutputs {
    std::vector<double> value;             // at value points
    std::vector<double> tangent_value;     // at tangent points
    std::vector<double> tangent_derivative;
};

/// Differentiates a scalar loss of the network outputs with respect to all
/// parameters. The functional receives the outputs and writes dloss/doutput
/// into the adjoint record (same shape), returning the loss.
struct LossGradientEvaluator {
    std::vector<double> value_points;
    std::vector<double> tangent_points;

    template <class Functional>
    double operator()(const MLPParams& params, Functional&& functional, std::span<double> grad) {
        out_.value.resize(value_points.size());
        out_.tangent_value.resize(tangent_points.size());
        out_.tangent_derivative.resize(tangent_points.size());
        forward_batch(params, value_points, false, ws_value_, out_.value, {});
        forward_batch(params, tangent_points, true, ws_tangent_, out_.tangent_value, out_.tangent_derivative);
        detail::check_finite_outputs(value_points, out_.value);
        detail::check_finite_outputs(tangent_points, out_.tangent_value);
        detail::check_finite_outputs(tangent_points, out_.tangent_derivative);
        adj_.value.assign(value_points.size(), 0.0);
        adj_.tangent_value.assign(tangent_points.size(), 0.0);
        adj_.tangent_derivative.assign(tangent_points.size(), 0.0);
        const double loss = functional(std::as_const(out_), adj_);
        if (!std::isfinite(loss)) fail(ErrorKind::numeric, "loss is not finite");
        std::fill(grad.begin(), grad.end(), 0.0);
        if (!value_points.empty()) backward_batch(params, ws_value_, adj_.value, {}, grad);
        if (!tangent_points.empty()) {
            backward_batch(params, ws_tangent_, adj_.tangent_value, adj_.tangent_derivative, grad);
        }
        return loss;
    }

    template <class Functional>
    double value_only(const MLPParams& params, Functional&& functional) {
        out_.value.resize(value_points.size());
        out_.tangent_value.resize(tangent_points.size());
        out_.tangent_derivative.resize(tangent_points.size());
        forward_batch(params, value_points, false, ws_value_, out_.value, {});
        forward_batch(params, tangent_points, true, ws_tangent_, out_.tangent_value, out_.tangent_derivative);
        adj_.value.assign(value_points.size(), 0.0);
        adj_.tangent_value.assign(tangent_points.size(), 0.0);
        adj_.tangent_derivative.assign(tangent_points.size(), 0.0);
        return functional(std::as_const(out_), adj_);
    }

    const NetworkOutputs& outputs() const { return out_; }
    const BatchWorkspace& value_workspace() const { return ws_value_; }
    const BatchWorkspace& tangent_workspace() const { return ws_tangent_; }

private:
    BatchWorkspace ws_value_;
    BatchWorkspace ws_tangent_;
    NetworkOutputs out_;
    NetworkOutputs adj_;
};

/// Gradient of functional(outputs) over the flat parameter vector.
template <class Functional>
std::vector<double> loss_gradient(const MLPParams& params, std::span<const double> value_points,
                                  std::span<const double> tangent_points, Functional&& functional,
                                  double* loss_out = nullptr) {
    LossGradientEvaluator eval;
    eval.value_points.assign(value_points.begin(), value_points.end());
    eval.tangent_points.assign(tangent_points.begin(), tangent_points.end());
    std::vector<double> grad(params.size(), 0.0);
    const double loss = eval(params, functional, grad);
    if (loss_out != nullptr) *loss_out = loss;
    return grad;
}

namespace detail {

inline std::string shortest_repr(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace detail

/// Text format: "layers 1 20 ... 1" then one shortest-round-trip decimal per line.
inline void save_params(std::ostream& os, const MLPParams& params) {
    os << "layers";
    for (int n : params.layer_sizes()) os << ' ' << n;
    os << '\n';
    for (double v : params.flat()) os << detail::shortest_repr(v) << '\n';
}

inline MLPParams load_params(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) fail(ErrorKind::config, "parameter file is empty");
    std::istringstream header(line);
    std::string tag;
    header >> tag;
    if (tag != "layers") fail(ErrorKind::config, "parameter file must start with 'layers'");
    std::vector<int> sizes;
    for (int n; header >> n;) sizes.push_back(n);
    std::vector<double> flat;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        double v = 0.0;
        const auto res = std::from_chars(line.data(), line.data() + line.size(), v);
        if (res.ec != std::errc{} || res.ptr != line.data() + line.size()) {
            fail(ErrorKind::config, "parameter file: cannot parse '" + line + "'");
        }
        flat.push_back(v);
    }
    return MLPParams::unpack(sizes, flat);
}

}  // namespace gerber_shiu
