#include "loyalty/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "loyalty/errors.hpp"
#include "loyalty/nn/int8.hpp"
#include "loyalty/nn/losses.hpp"

namespace loyalty::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

ConstMatMap as_matrix(const Tensor& t) {
    return ConstMatMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                       static_cast<Eigen::Index>(t.cols()));
}
MatMap as_matrix(Tensor& t) {
    return MatMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

Tape& common_tape(Var a, Var b) {
    if (!a.valid() || !b.valid()) throw InvalidInput("operation on an empty Var");
    if (a.tape() != b.tape()) throw InvalidInput("operands recorded on different tapes");
    return *a.tape();
}

Tape& tape_of(Var a) {
    if (!a.valid()) throw InvalidInput("operation on an empty Var");
    return *a.tape();
}

void require_matrix(const Tensor& t, const char* op) {
    if (t.rank() != 2) {
        throw InvalidInput(std::string(op) + ": expected a matrix, got " + t.shape_string());
    }
}

void accumulate(Tensor& dst, const Tensor& src) {
    auto d = dst.values();
    auto s = src.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

Var matmul(Var a, Var b) {
    Tape& tape = common_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_matrix(av, "matmul");
    require_matrix(bv, "matmul");
    if (av.cols() != bv.rows()) {
        throw InvalidInput("matmul: shapes " + av.shape_string() + " and " + bv.shape_string());
    }
    Tensor out = Tensor::matrix(av.rows(), bv.cols());
    as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv);
    const auto ia = a.id(), ib = b.id();
    return tape.push(std::move(out), tape.requires_grad(ia) || tape.requires_grad(ib),
                     [ia, ib](Tape& t, const Tensor& g) {
                         if (t.requires_grad(ia)) {
                             as_matrix(t.grad(ia)).noalias() +=
                                 as_matrix(g) * as_matrix(t.value(ib)).transpose();
                         }
                         if (t.requires_grad(ib)) {
                             as_matrix(t.grad(ib)).noalias() +=
                                 as_matrix(t.value(ia)).transpose() * as_matrix(g);
                         }
                     });
}

Var matmul_nt(Var a, Var b) {
    Tape& tape = common_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_matrix(av, "matmul_nt");
    require_matrix(bv, "matmul_nt");
    if (av.cols() != bv.cols()) {
        throw InvalidInput("matmul_nt: shapes " + av.shape_string() + " and " +
                           bv.shape_string());
    }
    Tensor out = Tensor::matrix(av.rows(), bv.rows());
    as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv).transpose();
    const auto ia = a.id(), ib = b.id();
    return tape.push(std::move(out), tape.requires_grad(ia) || tape.requires_grad(ib),
                     [ia, ib](Tape& t, const Tensor& g) {
                         if (t.requires_grad(ia)) {
                             as_matrix(t.grad(ia)).noalias() += as_matrix(g) * as_matrix(t.value(ib));
                         }
                         if (t.requires_grad(ib)) {
                             as_matrix(t.grad(ib)).noalias() +=
                                 as_matrix(g).transpose() * as_matrix(t.value(ia));
                         }
                     });
}

Var add(Var a, Var b) {
    Tape& tape = common_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (!av.same_shape(bv)) {
        throw InvalidInput("add: shapes " + av.shape_string() + " and " + bv.shape_string());
    }
    Tensor out = av;
    accumulate(out, bv);
    const auto ia = a.id(), ib = b.id();
    return tape.push(std::move(out), tape.requires_grad(ia) || tape.requires_grad(ib),
                     [ia, ib](Tape& t, const Tensor& g) {
                         if (t.requires_grad(ia)) accumulate(t.grad(ia), g);
                         if (t.requires_grad(ib)) accumulate(t.grad(ib), g);
                     });
}

Var add_row(Var a, Var r) {
    Tape& tape = common_tape(a, r);
    const Tensor& av = a.value();
    const Tensor& rv = r.value();
    require_matrix(av, "add_row");
    if (rv.size() != av.cols()) {
        throw InvalidInput("add_row: row " + rv.shape_string() + " does not match " +
                           av.shape_string());
    }
    Tensor out = av;
    const std::size_t n = av.cols();
    for (std::size_t i = 0; i < av.rows(); ++i) {
        for (std::size_t j = 0; j < n; ++j) out(i, j) += rv[j];
    }
    const auto ia = a.id(), ir = r.id();
    return tape.push(std::move(out), tape.requires_grad(ia) || tape.requires_grad(ir),
                     [ia, ir](Tape& t, const Tensor& g) {
                         if (t.requires_grad(ia)) accumulate(t.grad(ia), g);
                         if (t.requires_grad(ir)) {
                             Tensor& gr = t.grad(ir);
                             const std::size_t n = g.cols();
                             for (std::size_t i = 0; i < g.rows(); ++i) {
                                 for (std::size_t j = 0; j < n; ++j) gr[j] += g(i, j);
                             }
                         }
                     });
}

Var mul(Var a, Var b) {
    Tape& tape = common_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (!av.same_shape(bv)) {
        throw InvalidInput("mul: shapes " + av.shape_string() + " and " + bv.shape_string());
    }
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    const auto ia = a.id(), ib = b.id();
    return tape.push(std::move(out), tape.requires_grad(ia) || tape.requires_grad(ib),
                     [ia, ib](Tape& t, const Tensor& g) {
                         if (t.requires_grad(ia)) {
                             Tensor& ga = t.grad(ia);
                             const Tensor& bv = t.value(ib);
                             for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                         }
                         if (t.requires_grad(ib)) {
                             Tensor& gb = t.grad(ib);
                             const Tensor& av = t.value(ia);
                             for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                         }
                     });
}

Var scale(Var a, double factor) {
    Tape& tape = tape_of(a);
    Tensor out = a.value();
    for (double& v : out.values()) v *= factor;
    const auto ia = a.id();
    return tape.push(std::move(out), tape.requires_grad(ia), [ia, factor](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
    });
}

Var scale_by(Var a, Var s) {
    Tape& tape = common_tape(a, s);
    if (s.value().size() != 1) {
        throw InvalidInput("scale_by: factor must be 1x1, got " + s.value().shape_string());
    }
    const double f = s.value()[0];
    Tensor out = a.value();
    for (double& v : out.values()) v *= f;
    const auto ia = a.id(), is = s.id();
    return tape.push(std::move(out), tape.requires_grad(ia) || tape.requires_grad(is),
                     [ia, is](Tape& t, const Tensor& g) {
                         const double f = t.value(is)[0];
                         if (t.requires_grad(ia)) {
                             Tensor& ga = t.grad(ia);
                             for (std::size_t i = 0; i < g.size(); ++i) ga[i] += f * g[i];
                         }
                         if (t.requires_grad(is)) {
                             const Tensor& av = t.value(ia);
                             double acc = 0.0;
                             for (std::size_t i = 0; i < g.size(); ++i) acc += av[i] * g[i];
                             t.grad(is)[0] += acc;
                         }
                     });
}

Var sum(Var a) {
    Tape& tape = tape_of(a);
    double total = 0.0;
    for (double v : a.value().values()) total += v;
    const auto ia = a.id();
    return tape.push(Tensor::scalar(total), tape.requires_grad(ia), [ia](Tape& t, const Tensor& g) {
        const double gv = g[0];
        for (double& v : t.grad(ia).values()) v += gv;
    });
}

Var gelu(Var a) {
    Tape& tape = tape_of(a);
    Tensor out = a.value();
    for (double& v : out.values()) v = 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
    const auto ia = a.id();
    return tape.push(std::move(out), tape.requires_grad(ia), [ia](Tape& t, const Tensor& g) {
        const Tensor& x = t.value(ia);
        Tensor& gx = t.grad(ia);
        constexpr double inv_sqrt_2pi = 0.3989422804014327;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = x[i];
            const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
            gx[i] += g[i] * (cdf + v * pdf);
        }
    });
}

Var layer_norm(Var a, Var gain, Var bias, double eps) {
    Tape& tape = common_tape(a, gain);
    if (bias.tape() != &tape) throw InvalidInput("layer_norm: operands on different tapes");
    const Tensor& x = a.value();
    require_matrix(x, "layer_norm");
    const std::size_t m = x.rows(), n = x.cols();
    if (gain.value().size() != n || bias.value().size() != n) {
        throw InvalidInput("layer_norm: gain/bias size does not match " + x.shape_string());
    }
    Tensor xhat = Tensor::matrix(m, n);
    std::vector<double> inv_std(m);
    for (std::size_t i = 0; i < m; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += x(i, j);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = x(i, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) xhat(i, j) = (x(i, j) - mean) * inv_std[i];
    }
    const Tensor& gv = gain.value();
    const Tensor& bv = bias.value();
    Tensor out = Tensor::matrix(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) out(i, j) = xhat(i, j) * gv[j] + bv[j];
    }
    const auto ia = a.id(), ig = gain.id(), ib = bias.id();
    const bool rg = tape.requires_grad(ia) || tape.requires_grad(ig) || tape.requires_grad(ib);
    return tape.push(
        std::move(out), rg,
        [ia, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t,
                                                                           const Tensor& g) {
            const std::size_t m = g.rows(), n = g.cols();
            if (t.requires_grad(ig)) {
                Tensor& gg = t.grad(ig);
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t j = 0; j < n; ++j) gg[j] += g(i, j) * xhat(i, j);
                }
            }
            if (t.requires_grad(ib)) {
                Tensor& gb = t.grad(ib);
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t j = 0; j < n; ++j) gb[j] += g(i, j);
                }
            }
            if (t.requires_grad(ia)) {
                const Tensor& gv = t.value(ig);
                Tensor& gx = t.grad(ia);
                const double inv_n = 1.0 / static_cast<double>(n);
                for (std::size_t i = 0; i < m; ++i) {
                    double sum_dy = 0.0, sum_dy_xhat = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        const double dy = g(i, j) * gv[j];
                        sum_dy += dy;
                        sum_dy_xhat += dy * xhat(i, j);
                    }
                    for (std::size_t j = 0; j < n; ++j) {
                        const double dy = g(i, j) * gv[j];
                        gx(i, j) += inv_std[i] *
                                    (dy - inv_n * sum_dy - xhat(i, j) * inv_n * sum_dy_xhat);
                    }
                }
            }
        });
}

Var softmax_rows(Var a) {
    Tape& tape = tape_of(a);
    const Tensor& x = a.value();
    require_matrix(x, "softmax_rows");
    Tensor out = x;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto r = out.row_span(i);
        const double mx = *std::max_element(r.begin(), r.end());
        double z = 0.0;
        for (double& v : r) {
            v = std::exp(v - mx);
            z += v;
        }
        for (double& v : r) v /= z;
    }
    const auto ia = a.id();
    const auto io = tape.size();  // id the output will receive
    return tape.push(std::move(out), tape.requires_grad(ia), [ia, io](Tape& t, const Tensor& g) {
        const Tensor& y = t.value(io);
        Tensor& gx = t.grad(ia);
        for (std::size_t i = 0; i < g.rows(); ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < g.cols(); ++j) dot += g(i, j) * y(i, j);
            for (std::size_t j = 0; j < g.cols(); ++j) gx(i, j) += y(i, j) * (g(i, j) - dot);
        }
    });
}

Var embedding(Var table, std::span<const std::size_t> ids) {
    Tape& tape = tape_of(table);
    const Tensor& tv = table.value();
    require_matrix(tv, "embedding");
    if (ids.empty()) throw InvalidInput("embedding: empty id sequence");
    const std::size_t d = tv.cols();
    Tensor out = Tensor::matrix(ids.size(), d);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= tv.rows()) {
            throw InvalidInput("embedding: id " + std::to_string(ids[i]) + " out of range for " +
                               std::to_string(tv.rows()) + " rows");
        }
        std::copy_n(tv.data() + ids[i] * d, d, out.data() + i * d);
    }
    const auto it = table.id();
    return tape.push(std::move(out), tape.requires_grad(it),
                     [it, ids = std::vector<std::size_t>(ids.begin(), ids.end())](Tape& t,
                                                                                 const Tensor& g) {
                         Tensor& gt = t.grad(it);
                         const std::size_t d = g.cols();
                         for (std::size_t i = 0; i < ids.size(); ++i) {
                             double* dst = gt.data() + ids[i] * d;
                             const double* src = g.data() + i * d;
                             for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                         }
                     });
}

Var row(Var a, std::size_t r) {
    Tape& tape = tape_of(a);
    const Tensor& x = a.value();
    require_matrix(x, "row");
    if (r >= x.rows()) throw InvalidInput("row: index out of range");
    auto src = x.row_span(r);
    Tensor out = Tensor::row(std::vector<double>(src.begin(), src.end()));
    const auto ia = a.id();
    return tape.push(std::move(out), tape.requires_grad(ia), [ia, r](Tape& t, const Tensor& g) {
        auto dst = t.grad(ia).row_span(r);
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += g[j];
    });
}

Var fake_quantize(Var a) {
    Tape& tape = tape_of(a);
    Tensor out = fake_quantize_values(a.value());
    const auto ia = a.id();
    return tape.push(std::move(out), tape.requires_grad(ia),
                     [ia](Tape& t, const Tensor& g) { accumulate(t.grad(ia), g); });
}

Var cross_entropy(Var logits, std::size_t target) {
    Tape& tape = tape_of(logits);
    LossAndGrad lg = cross_entropy(logits.value().values(), target);
    const auto il = logits.id();
    return tape.push(Tensor::scalar(lg.loss), tape.requires_grad(il),
                     [il, grad = std::move(lg.grad)](Tape& t, const Tensor& g) {
                         Tensor& gl = t.grad(il);
                         for (std::size_t i = 0; i < grad.size(); ++i) gl[i] += g[0] * grad[i];
                     });
}

Var kd_loss(Var student_logits, std::span<const double> teacher_logits, double temperature) {
    Tape& tape = tape_of(student_logits);
    LossAndGrad lg = kd_loss(teacher_logits, student_logits.value().values(), temperature);
    const auto il = student_logits.id();
    return tape.push(Tensor::scalar(lg.loss), tape.requires_grad(il),
                     [il, grad = std::move(lg.grad)](Tape& t, const Tensor& g) {
                         Tensor& gl = t.grad(il);
                         for (std::size_t i = 0; i < grad.size(); ++i) gl[i] += g[0] * grad[i];
                     });
}

Var normalized_mse(Var a, std::span<const double> target_unit) {
    Tape& tape = tape_of(a);
    const Tensor& x = a.value();
    const std::size_t n = x.size();
    if (target_unit.size() != n) throw InvalidInput("normalized_mse: size mismatch");
    double norm = 0.0;
    for (double v : x.values()) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) throw InvalidInput("normalized_mse: zero vector cannot be normalized");
    std::vector<double> diff(n);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        diff[i] = x[i] / norm - target_unit[i];
        loss += diff[i] * diff[i];
    }
    loss /= static_cast<double>(n);
    const auto ia = a.id();
    return tape.push(Tensor::scalar(loss), tape.requires_grad(ia),
                     [ia, norm, diff = std::move(diff)](Tape& t, const Tensor& g) {
                         // d/dx of mean((x/|x| - t)^2) = (2/n) (I - u u^T) diff / |x|
                         const Tensor& x = t.value(ia);
                         const std::size_t n = diff.size();
                         double u_dot_diff = 0.0;
                         for (std::size_t i = 0; i < n; ++i) u_dot_diff += x[i] / norm * diff[i];
                         Tensor& gx = t.grad(ia);
                         const double c = g[0] * 2.0 / static_cast<double>(n) / norm;
                         for (std::size_t i = 0; i < n; ++i) {
                             gx[i] += c * (diff[i] - x[i] / norm * u_dot_diff);
                         }
                     });
}

}  // namespace loyalty::nn
