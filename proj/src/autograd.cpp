#include "hdrgan/autograd.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "hdrgan/error.hpp"
#include "hdrgan/rng.hpp"

namespace hdrgan::ag {

namespace {

thread_local bool t_grad_enabled = true;

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<MatRM>;
using CMapMat = Eigen::Map<const MatRM>;

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (!(a.shape() == b.shape())) {
        throw ArgumentError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    }
}

// Wraps an op result. When no input needs a gradient the closure is dropped.
Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> fn) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    bool needs = false;
    if (t_grad_enabled) {
        for (const auto& in : inputs) needs = needs || in.requires_grad();
    }
    if (needs) {
        node->requires_grad = true;
        node->inputs.reserve(inputs.size());
        for (auto& in : inputs) node->inputs.push_back(in.ptr());
        node->backward = std::move(fn);
    }
    return Var(std::move(node));
}

// Accumulation target for input i, or nullptr when it does not need a gradient.
double* grad_of(Node& self, std::size_t i) {
    Node& in = *self.inputs[i];
    return in.requires_grad ? in.grad_buffer().data.data() : nullptr;
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void im2col(const double* x, int c, int h, int w, int k, int stride, int pad, int ho, int wo, double* col) {
    const std::size_t hwo = static_cast<std::size_t>(ho) * wo;
    for (int ch = 0; ch < c; ++ch) {
        const double* plane = x + static_cast<std::size_t>(ch) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double* row = col + ((static_cast<std::size_t>(ch) * k + ky) * k + kx) * hwo;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    double* dst = row + static_cast<std::size_t>(oy) * wo;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + wo, 0.0);
                        continue;
                    }
                    const double* src = plane + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        dst[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const double* col, int c, int h, int w, int k, int stride, int pad, int ho, int wo, double* x) {
    const std::size_t hwo = static_cast<std::size_t>(ho) * wo;
    for (int ch = 0; ch < c; ++ch) {
        double* plane = x + static_cast<std::size_t>(ch) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const double* row = col + ((static_cast<std::size_t>(ch) * k + ky) * k + kx) * hwo;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    const double* src = row + static_cast<std::size_t>(oy) * wo;
                    double* dst = plane + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < w) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

}  // namespace

std::string Shape::str() const {
    return "[" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + "]";
}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(s), data(std::move(values)) {
    if (data.size() != shape.numel()) {
        throw ArgumentError("tensor data size " + std::to_string(data.size()) + " does not match shape " + shape.str());
    }
}

Tensor& Node::grad_buffer() {
    if (grad.data.empty()) grad = Tensor(value.shape);
    return grad;
}

double Var::item() const {
    if (node_->value.numel() != 1) throw ArgumentError("item() on tensor of shape " + shape().str());
    return node_->value.data[0];
}

Var constant(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    return Var(std::move(node));
}

Var parameter(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = true;
    return Var(std::move(node));
}

Var detach(const Var& v) { return constant(v.value()); }

bool grad_enabled() noexcept { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

void backward(const Var& loss) {
    if (!loss.requires_grad()) return;
    if (loss.value().numel() != 1) throw ArgumentError("backward() needs a scalar loss, got " + loss.shape().str());

    // Iterative post-order DFS for a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{loss.node(), 0}};
    visited.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->grad_buffer().data[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (!node->backward || node->grad.data.empty()) continue;
        node->backward(*node);
        node->grad = Tensor();  // interior gradients are not kept
    }
}

// ---- convolution -------------------------------------------------------------

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
    const Shape xs = x.shape();
    const Shape ws = weight.shape();
    if (ws.c != xs.c || ws.h != ws.w) {
        throw ConfigError("conv2d: weight " + ws.str() + " incompatible with input " + xs.str());
    }
    const int k = ws.h;
    const int cout = ws.n;
    const int ho = (xs.h + 2 * pad - k) / stride + 1;
    const int wo = (xs.w + 2 * pad - k) / stride + 1;
    if (xs.h + 2 * pad < k || xs.w + 2 * pad < k || ho <= 0 || wo <= 0) {
        throw ArgumentError("conv2d: input " + xs.str() + " too small for kernel " + std::to_string(k));
    }
    if (bias && bias.value().numel() != static_cast<std::size_t>(cout)) {
        throw ConfigError("conv2d: bias size does not match output channels");
    }
    const int kk = xs.c * k * k;
    const std::size_t hwo = static_cast<std::size_t>(ho) * wo;
    const std::size_t in_plane = static_cast<std::size_t>(xs.c) * xs.h * xs.w;
    const bool direct = k == 1 && stride == 1 && pad == 0;

    Tensor out(Shape{xs.n, cout, ho, wo});
    std::vector<double> col(direct ? 0 : static_cast<std::size_t>(kk) * hwo);
    CMapMat wm(weight.value().data.data(), cout, kk);
    for (int n = 0; n < xs.n; ++n) {
        const double* xin = x.value().data.data() + n * in_plane;
        const double* cp = xin;
        if (!direct) {
            im2col(xin, xs.c, xs.h, xs.w, k, stride, pad, ho, wo, col.data());
            cp = col.data();
        }
        MapMat ym(out.data.data() + n * cout * hwo, cout, static_cast<Eigen::Index>(hwo));
        ym.noalias() = wm * CMapMat(cp, kk, static_cast<Eigen::Index>(hwo));
        if (bias) {
            for (int o = 0; o < cout; ++o) ym.row(o).array() += bias.value().data[o];
        }
    }

    std::vector<Var> inputs{x, weight};
    if (bias) inputs.push_back(bias);
    return make_result(std::move(out), std::move(inputs), [=](Node& self) {
        const Node& xn = *self.inputs[0];
        const Node& wn = *self.inputs[1];
        double* gx = grad_of(self, 0);
        double* gw = grad_of(self, 1);
        double* gb = self.inputs.size() > 2 ? grad_of(self, 2) : nullptr;
        std::vector<double> colbuf(direct ? 0 : static_cast<std::size_t>(kk) * hwo);
        std::vector<double> dcol(gx && !direct ? static_cast<std::size_t>(kk) * hwo : 0);
        CMapMat w(wn.value.data.data(), cout, kk);
        for (int n = 0; n < xs.n; ++n) {
            CMapMat dy(self.grad.data.data() + n * cout * hwo, cout, static_cast<Eigen::Index>(hwo));
            const double* xin = xn.value.data.data() + n * in_plane;
            if (gw) {
                const double* cp = xin;
                if (!direct) {
                    im2col(xin, xs.c, xs.h, xs.w, k, stride, pad, ho, wo, colbuf.data());
                    cp = colbuf.data();
                }
                MapMat(gw, cout, kk).noalias() += dy * CMapMat(cp, kk, static_cast<Eigen::Index>(hwo)).transpose();
            }
            if (gb) {
                for (int o = 0; o < cout; ++o) gb[o] += dy.row(o).sum();
            }
            if (gx) {
                if (direct) {
                    MapMat(gx + n * in_plane, kk, static_cast<Eigen::Index>(hwo)).noalias() += w.transpose() * dy;
                } else {
                    MapMat(dcol.data(), kk, static_cast<Eigen::Index>(hwo)).noalias() = w.transpose() * dy;
                    col2im_add(dcol.data(), xs.c, xs.h, xs.w, k, stride, pad, ho, wo, gx + n * in_plane);
                }
            }
        }
    });
}

// ---- elementwise ---------------------------------------------------------------

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = a.value().data[i] + b.value().data[i];
    return make_result(std::move(out), {a, b}, [](Node& self) {
        const auto& g = self.grad.data;
        for (std::size_t k = 0; k < 2; ++k) {
            if (double* gi = grad_of(self, k)) {
                for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
            }
        }
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = a.value().data[i] - b.value().data[i];
    return make_result(std::move(out), {a, b}, [](Node& self) {
        const auto& g = self.grad.data;
        if (double* ga = grad_of(self, 0)) {
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (double* gb = grad_of(self, 1)) {
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = a.value().data[i] * b.value().data[i];
    return make_result(std::move(out), {a, b}, [](Node& self) {
        const auto& g = self.grad.data;
        const auto& av = self.inputs[0]->value.data;
        const auto& bv = self.inputs[1]->value.data;
        if (double* ga = grad_of(self, 0)) {
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (double* gb = grad_of(self, 1)) {
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
    });
}

Var scale(const Var& a, double s) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = a.value().data[i] * s;
    return make_result(std::move(out), {a}, [s](Node& self) {
        const auto& g = self.grad.data;
        double* ga = grad_of(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
    });
}

Var add_scalar(const Var& a, double s) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = a.value().data[i] + s;
    return make_result(std::move(out), {a}, [](Node& self) {
        const auto& g = self.grad.data;
        double* ga = grad_of(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

Var mul_spatial(const Var& x, const Var& s) {
    const Shape xs = x.shape();
    const Shape ss = s.shape();
    if (ss.n != xs.n || ss.c != 1 || ss.h != xs.h || ss.w != xs.w) {
        throw ConfigError("mul_spatial: scale map " + ss.str() + " incompatible with " + xs.str());
    }
    const std::size_t plane = xs.plane();
    Tensor out(xs);
    for (int n = 0; n < xs.n; ++n) {
        const double* sp = s.value().data.data() + n * plane;
        for (int c = 0; c < xs.c; ++c) {
            const std::size_t base = (static_cast<std::size_t>(n) * xs.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) out.data[base + i] = x.value().data[base + i] * sp[i];
        }
    }
    return make_result(std::move(out), {x, s}, [xs, plane](Node& self) {
        const auto& g = self.grad.data;
        const auto& xv = self.inputs[0]->value.data;
        const auto& sv = self.inputs[1]->value.data;
        double* gx = grad_of(self, 0);
        double* gs = grad_of(self, 1);
        for (int n = 0; n < xs.n; ++n) {
            for (int c = 0; c < xs.c; ++c) {
                const std::size_t base = (static_cast<std::size_t>(n) * xs.c + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    if (gx) gx[base + i] += g[base + i] * sv[n * plane + i];
                    if (gs) gs[n * plane + i] += g[base + i] * xv[base + i];
                }
            }
        }
    });
}

Var blend(const Var& a, const Var& b, const Tensor& alpha) {
    require_same_shape(a, b, "blend");
    const Shape s = a.shape();
    if (alpha.shape.n != s.n || alpha.shape.c != 1 || alpha.shape.h != s.h || alpha.shape.w != s.w) {
        throw ArgumentError("blend: mask " + alpha.shape.str() + " incompatible with " + s.str());
    }
    const std::size_t plane = s.plane();
    Tensor out(s);
    for (int n = 0; n < s.n; ++n) {
        const double* al = alpha.data.data() + n * plane;
        for (int c = 0; c < s.c; ++c) {
            const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                out.data[base + i] = al[i] * a.value().data[base + i] + (1.0 - al[i]) * b.value().data[base + i];
            }
        }
    }
    return make_result(std::move(out), {a, b}, [s, plane, alpha](Node& self) {
        const auto& g = self.grad.data;
        double* ga = grad_of(self, 0);
        double* gb = grad_of(self, 1);
        for (int n = 0; n < s.n; ++n) {
            const double* al = alpha.data.data() + n * plane;
            for (int c = 0; c < s.c; ++c) {
                const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    if (ga) ga[base + i] += g[base + i] * al[i];
                    if (gb) gb[base + i] += g[base + i] * (1.0 - al[i]);
                }
            }
        }
    });
}

Var relu(const Var& x) { return leaky_relu(x, 0.0); }

Var leaky_relu(const Var& x, double slope) {
    Tensor out(x.shape());
    const auto& in = x.value().data;
    for (std::size_t i = 0; i < in.size(); ++i) out.data[i] = in[i] > 0.0 ? in[i] : slope * in[i];
    return make_result(std::move(out), {x}, [slope](Node& self) {
        const auto& g = self.grad.data;
        const auto& in = self.inputs[0]->value.data;
        double* gx = grad_of(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += in[i] > 0.0 ? g[i] : slope * g[i];
    });
}

Var sigmoid(const Var& x) {
    Tensor out(x.shape());
    const auto& in = x.value().data;
    for (std::size_t i = 0; i < in.size(); ++i) out.data[i] = stable_sigmoid(in[i]);
    return make_result(std::move(out), {x}, [](Node& self) {
        const auto& g = self.grad.data;
        const auto& y = self.value.data;
        double* gx = grad_of(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
    });
}

Var softplus(const Var& x) {
    Tensor out(x.shape());
    const auto& in = x.value().data;
    for (std::size_t i = 0; i < in.size(); ++i) out.data[i] = std::max(in[i], 0.0) + std::log1p(std::exp(-std::abs(in[i])));
    return make_result(std::move(out), {x}, [](Node& self) {
        const auto& g = self.grad.data;
        const auto& in = self.inputs[0]->value.data;
        double* gx = grad_of(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * stable_sigmoid(in[i]);
    });
}

Var abs(const Var& x) {
    Tensor out(x.shape());
    const auto& in = x.value().data;
    for (std::size_t i = 0; i < in.size(); ++i) out.data[i] = std::abs(in[i]);
    return make_result(std::move(out), {x}, [](Node& self) {
        const auto& g = self.grad.data;
        const auto& in = self.inputs[0]->value.data;
        double* gx = grad_of(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += in[i] > 0.0 ? g[i] : (in[i] < 0.0 ? -g[i] : 0.0);
    });
}

// ---- structural ------------------------------------------------------------------

Var instance_norm(const Var& x, double eps) {
    const Shape s = x.shape();
    const std::size_t plane = s.plane();
    const std::size_t groups = static_cast<std::size_t>(s.n) * s.c;
    Tensor out(s);
    std::vector<double> inv_std(groups);
    for (std::size_t gi = 0; gi < groups; ++gi) {
        const double* in = x.value().data.data() + gi * plane;
        double m = 0.0;
        for (std::size_t i = 0; i < plane; ++i) m += in[i];
        m /= static_cast<double>(plane);
        double v = 0.0;
        for (std::size_t i = 0; i < plane; ++i) v += (in[i] - m) * (in[i] - m);
        v /= static_cast<double>(plane);
        const double is = 1.0 / std::sqrt(v + eps);
        inv_std[gi] = is;
        double* o = out.data.data() + gi * plane;
        for (std::size_t i = 0; i < plane; ++i) o[i] = (in[i] - m) * is;
    }
    return make_result(std::move(out), {x}, [plane, groups, inv_std = std::move(inv_std)](Node& self) {
        double* gx = grad_of(self, 0);
        for (std::size_t gi = 0; gi < groups; ++gi) {
            const double* g = self.grad.data.data() + gi * plane;
            const double* y = self.value.data.data() + gi * plane;
            double mg = 0.0, mgy = 0.0;
            for (std::size_t i = 0; i < plane; ++i) {
                mg += g[i];
                mgy += g[i] * y[i];
            }
            mg /= static_cast<double>(plane);
            mgy /= static_cast<double>(plane);
            double* dst = gx + gi * plane;
            for (std::size_t i = 0; i < plane; ++i) dst[i] += inv_std[gi] * (g[i] - mg - y[i] * mgy);
        }
    });
}

Var concat_channels(const Var& a, const Var& b) {
    const Shape sa = a.shape(), sb = b.shape();
    if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
        throw ConfigError("concat_channels: " + sa.str() + " vs " + sb.str());
    }
    const std::size_t pa = static_cast<std::size_t>(sa.c) * sa.h * sa.w;
    const std::size_t pb = static_cast<std::size_t>(sb.c) * sb.h * sb.w;
    Tensor out(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
    for (int n = 0; n < sa.n; ++n) {
        double* o = out.data.data() + n * (pa + pb);
        std::copy_n(a.value().data.data() + n * pa, pa, o);
        std::copy_n(b.value().data.data() + n * pb, pb, o + pa);
    }
    return make_result(std::move(out), {a, b}, [sa, pa, pb](Node& self) {
        double* ga = grad_of(self, 0);
        double* gb = grad_of(self, 1);
        for (int n = 0; n < sa.n; ++n) {
            const double* g = self.grad.data.data() + n * (pa + pb);
            if (ga) {
                for (std::size_t i = 0; i < pa; ++i) ga[n * pa + i] += g[i];
            }
            if (gb) {
                for (std::size_t i = 0; i < pb; ++i) gb[n * pb + i] += g[pa + i];
            }
        }
    });
}

Var upsample_nearest(const Var& x, int factor) {
    if (factor < 1) throw ArgumentError("upsample factor must be >= 1");
    if (factor == 1) return x;
    const Shape s = x.shape();
    const Shape os{s.n, s.c, s.h * factor, s.w * factor};
    Tensor out(os);
    const std::size_t groups = static_cast<std::size_t>(s.n) * s.c;
    for (std::size_t gi = 0; gi < groups; ++gi) {
        const double* in = x.value().data.data() + gi * s.plane();
        double* o = out.data.data() + gi * os.plane();
        for (int y = 0; y < os.h; ++y) {
            for (int xx = 0; xx < os.w; ++xx) o[static_cast<std::size_t>(y) * os.w + xx] = in[static_cast<std::size_t>(y / factor) * s.w + xx / factor];
        }
    }
    return make_result(std::move(out), {x}, [s, os, groups, factor](Node& self) {
        double* gx = grad_of(self, 0);
        for (std::size_t gi = 0; gi < groups; ++gi) {
            const double* g = self.grad.data.data() + gi * os.plane();
            double* dst = gx + gi * s.plane();
            for (int y = 0; y < os.h; ++y) {
                for (int xx = 0; xx < os.w; ++xx) dst[static_cast<std::size_t>(y / factor) * s.w + xx / factor] += g[static_cast<std::size_t>(y) * os.w + xx];
            }
        }
    });
}

Var avg_pool2(const Var& x) {
    const Shape s = x.shape();
    if (s.h < 2 || s.w < 2) throw ArgumentError("avg_pool2: input " + s.str() + " too small");
    const Shape os{s.n, s.c, s.h / 2, s.w / 2};
    Tensor out(os);
    const std::size_t groups = static_cast<std::size_t>(s.n) * s.c;
    for (std::size_t gi = 0; gi < groups; ++gi) {
        const double* in = x.value().data.data() + gi * s.plane();
        double* o = out.data.data() + gi * os.plane();
        for (int y = 0; y < os.h; ++y) {
            for (int xx = 0; xx < os.w; ++xx) {
                const double* p = in + static_cast<std::size_t>(2 * y) * s.w + 2 * xx;
                o[static_cast<std::size_t>(y) * os.w + xx] = 0.25 * (p[0] + p[1] + p[s.w] + p[s.w + 1]);
            }
        }
    }
    return make_result(std::move(out), {x}, [s, os, groups](Node& self) {
        double* gx = grad_of(self, 0);
        for (std::size_t gi = 0; gi < groups; ++gi) {
            const double* g = self.grad.data.data() + gi * os.plane();
            double* dst = gx + gi * s.plane();
            for (int y = 0; y < os.h; ++y) {
                for (int xx = 0; xx < os.w; ++xx) {
                    const double v = 0.25 * g[static_cast<std::size_t>(y) * os.w + xx];
                    double* p = dst + static_cast<std::size_t>(2 * y) * s.w + 2 * xx;
                    p[0] += v;
                    p[1] += v;
                    p[s.w] += v;
                    p[s.w + 1] += v;
                }
            }
        }
    });
}

Var dropout(const Var& x, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ArgumentError("dropout rate must lie in [0,1)");
    if (rate == 0.0) return x;
    const double keep_scale = 1.0 / (1.0 - rate);
    std::vector<double> mask(x.value().numel());
    for (auto& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
    Tensor out(x.shape());
    for (std::size_t i = 0; i < mask.size(); ++i) out.data[i] = x.value().data[i] * mask[i];
    return make_result(std::move(out), {x}, [mask = std::move(mask)](Node& self) {
        const auto& g = self.grad.data;
        double* gx = grad_of(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
    });
}

Var mu_tonemap(const Var& x, double mu) {
    if (!(mu > 0.0)) throw ArgumentError("mu must be positive");
    const double denom = std::log1p(mu);
    Tensor out(x.shape());
    const auto& in = x.value().data;
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (!(in[i] >= 0.0)) throw DomainError("mu_tonemap: negative or NaN input at element " + std::to_string(i));
        out.data[i] = std::log1p(mu * in[i]) / denom;
    }
    return make_result(std::move(out), {x}, [mu, denom](Node& self) {
        const auto& g = self.grad.data;
        const auto& in = self.inputs[0]->value.data;
        double* gx = grad_of(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mu / ((1.0 + mu * in[i]) * denom);
    });
}

// ---- reductions -----------------------------------------------------------------

Var sum(const Var& x) {
    double total = 0.0;
    for (double v : x.value().data) total += v;
    return make_result(Tensor(Shape{1, 1, 1, 1}, total), {x}, [](Node& self) {
        const double g = self.grad.data[0];
        double* gx = grad_of(self, 0);
        const std::size_t n = self.inputs[0]->value.numel();
        for (std::size_t i = 0; i < n; ++i) gx[i] += g;
    });
}

Var mean(const Var& x) {
    const double n = static_cast<double>(x.value().numel());
    return scale(sum(x), 1.0 / n);
}

Var l2_norm(const Var& x) {
    double ss = 0.0;
    for (double v : x.value().data) ss += v * v;
    const double norm = std::sqrt(ss);
    return make_result(Tensor(Shape{1, 1, 1, 1}, norm), {x}, [norm](Node& self) {
        if (norm == 0.0) return;
        const double g = self.grad.data[0] / norm;
        const auto& in = self.inputs[0]->value.data;
        double* gx = grad_of(self, 0);
        for (std::size_t i = 0; i < in.size(); ++i) gx[i] += g * in[i];
    });
}

Var bce_with_logits(const Var& logits, double target) {
    const auto& in = logits.value().data;
    double total = 0.0;
    for (double z : in) total += std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
    const double n = static_cast<double>(in.size());
    return make_result(Tensor(Shape{1, 1, 1, 1}, total / n), {logits}, [target, n](Node& self) {
        const double g = self.grad.data[0] / n;
        const auto& in = self.inputs[0]->value.data;
        double* gx = grad_of(self, 0);
        for (std::size_t i = 0; i < in.size(); ++i) gx[i] += g * (stable_sigmoid(in[i]) - target);
    });
}

}  // namespace hdrgan::ag
