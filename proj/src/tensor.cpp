#include "avth/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace avth::nn {

namespace {

Var make_node(Tensor val, std::vector<Var> parents, std::function<void(Node&)> back) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    n->requires_grad = false;
    for (const Var& p : parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(back);
    }
    return n;
}

void same_shape(const Var& a, const Var& b, const char* op) {
    if (a->val.shape != b->val.shape) throw ShapeError(std::string(op) + ": shape mismatch");
}

}  // namespace

Var leaf(Tensor t) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    n->requires_grad = true;
    return n;
}

Var constant(Tensor t) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    n->requires_grad = false;
    return n;
}

void backward(const Var& root) {
    if (root->val.size() != 1) throw ShapeError("backward() expects a scalar root");
    // Iterative topological order over the requires_grad subgraph.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack{{root.get(), 0}};
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->g().v[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

void zero_grad(const Var& v) {
    std::fill(v->grad.v.begin(), v->grad.v.end(), 0.0);
}

// ---------------------------------------------------------------------------

Var add(Var a, Var b) {
    same_shape(a, b, "add");
    Tensor out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out[i] += b->val[i];
    return make_node(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad)
            for (size_t i = 0; i < n.grad.size(); ++i) a->g()[i] += n.grad[i];
        if (b->requires_grad)
            for (size_t i = 0; i < n.grad.size(); ++i) b->g()[i] += n.grad[i];
    });
}

Var sub(Var a, Var b) {
    same_shape(a, b, "sub");
    Tensor out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out[i] -= b->val[i];
    return make_node(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad)
            for (size_t i = 0; i < n.grad.size(); ++i) a->g()[i] += n.grad[i];
        if (b->requires_grad)
            for (size_t i = 0; i < n.grad.size(); ++i) b->g()[i] -= n.grad[i];
    });
}

Var mul(Var a, Var b) {
    same_shape(a, b, "mul");
    Tensor out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out[i] *= b->val[i];
    return make_node(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad)
            for (size_t i = 0; i < n.grad.size(); ++i) a->g()[i] += n.grad[i] * b->val[i];
        if (b->requires_grad)
            for (size_t i = 0; i < n.grad.size(); ++i) b->g()[i] += n.grad[i] * a->val[i];
    });
}

Var scale(Var a, double s) {
    Tensor out = a->val;
    for (double& x : out.v) x *= s;
    return make_node(std::move(out), {a}, [a, s](Node& n) {
        for (size_t i = 0; i < n.grad.size(); ++i) a->g()[i] += n.grad[i] * s;
    });
}

Var add_scalar(Var a, double s) {
    Tensor out = a->val;
    for (double& x : out.v) x += s;
    return make_node(std::move(out), {a}, [a](Node& n) {
        for (size_t i = 0; i < n.grad.size(); ++i) a->g()[i] += n.grad[i];
    });
}

Var tanh_(Var a) {
    Tensor out = a->val;
    for (double& x : out.v) x = std::tanh(x);
    return make_node(std::move(out), {a}, [a](Node& n) {
        for (size_t i = 0; i < n.grad.size(); ++i)
            a->g()[i] += n.grad[i] * (1.0 - n.val[i] * n.val[i]);
    });
}

Var sigmoid_(Var a) {
    Tensor out = a->val;
    for (double& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
    return make_node(std::move(out), {a}, [a](Node& n) {
        for (size_t i = 0; i < n.grad.size(); ++i)
            a->g()[i] += n.grad[i] * n.val[i] * (1.0 - n.val[i]);
    });
}

Var log_(Var a) {
    Tensor out = a->val;
    for (double& x : out.v) x = std::log(x);
    return make_node(std::move(out), {a}, [a](Node& n) {
        for (size_t i = 0; i < n.grad.size(); ++i) a->g()[i] += n.grad[i] / a->val[i];
    });
}

Var sqrt_(Var a) {
    Tensor out = a->val;
    for (double& x : out.v) x = std::sqrt(x);
    return make_node(std::move(out), {a}, [a](Node& n) {
        for (size_t i = 0; i < n.grad.size(); ++i) {
            double d = std::max(n.val[i], 1e-20);
            a->g()[i] += n.grad[i] * 0.5 / d;
        }
    });
}

Var abs_(Var a) {
    Tensor out = a->val;
    for (double& x : out.v) x = std::abs(x);
    return make_node(std::move(out), {a}, [a](Node& n) {
        for (size_t i = 0; i < n.grad.size(); ++i)
            a->g()[i] += n.grad[i] * (a->val[i] >= 0.0 ? 1.0 : -1.0);
    });
}

Var clamp_(Var a, double lo, double hi) {
    Tensor out = a->val;
    for (double& x : out.v) x = std::clamp(x, lo, hi);
    return make_node(std::move(out), {a}, [a, lo, hi](Node& n) {
        for (size_t i = 0; i < n.grad.size(); ++i)
            if (a->val[i] > lo && a->val[i] < hi) a->g()[i] += n.grad[i];
    });
}

Var sum(Var a) {
    double s = 0;
    for (double x : a->val.v) s += x;
    return make_node(Tensor::from({1}, {s}), {a}, [a](Node& n) {
        for (size_t i = 0; i < a->val.size(); ++i) a->g()[i] += n.grad[0];
    });
}

Var mean(Var a) {
    double s = 0;
    for (double x : a->val.v) s += x;
    double inv = 1.0 / static_cast<double>(a->val.size());
    return make_node(Tensor::from({1}, {s * inv}), {a}, [a, inv](Node& n) {
        for (size_t i = 0; i < a->val.size(); ++i) a->g()[i] += n.grad[0] * inv;
    });
}

Var dot(Var a, Var b) {
    same_shape(a, b, "dot");
    double s = 0;
    for (size_t i = 0; i < a->val.size(); ++i) s += a->val[i] * b->val[i];
    return make_node(Tensor::from({1}, {s}), {a, b}, [a, b](Node& n) {
        if (a->requires_grad)
            for (size_t i = 0; i < a->val.size(); ++i) a->g()[i] += n.grad[0] * b->val[i];
        if (b->requires_grad)
            for (size_t i = 0; i < b->val.size(); ++i) b->g()[i] += n.grad[0] * a->val[i];
    });
}

Var matmul(Var a, Var b) {
    if (a->val.shape.size() != 2 || b->val.shape.size() != 2 ||
        a->val.shape[1] != b->val.shape[0])
        throw ShapeError("matmul: incompatible shapes");
    int m = a->val.shape[0], k = a->val.shape[1], n = b->val.shape[1];
    Tensor out({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0;
            for (int t = 0; t < k; ++t) s += a->val[i * k + t] * b->val[t * n + j];
            out[static_cast<size_t>(i) * n + j] = s;
        }
    return make_node(std::move(out), {a, b}, [a, b, m, k, n](Node& nd) {
        if (a->requires_grad) {
            Tensor& ga = a->g();
            for (int i = 0; i < m; ++i)
                for (int t = 0; t < k; ++t) {
                    double s = 0;
                    for (int j = 0; j < n; ++j)
                        s += nd.grad[static_cast<size_t>(i) * n + j] * b->val[t * n + j];
                    ga[static_cast<size_t>(i) * k + t] += s;
                }
        }
        if (b->requires_grad) {
            Tensor& gb = b->g();
            for (int t = 0; t < k; ++t)
                for (int j = 0; j < n; ++j) {
                    double s = 0;
                    for (int i = 0; i < m; ++i)
                        s += a->val[i * k + t] * nd.grad[static_cast<size_t>(i) * n + j];
                    gb[static_cast<size_t>(t) * n + j] += s;
                }
        }
    });
}

Var matmul_nt(Var a, Var b) {
    if (a->val.shape.size() != 2 || b->val.shape.size() != 2 ||
        a->val.shape[1] != b->val.shape[1])
        throw ShapeError("matmul_nt: incompatible shapes");
    int m = a->val.shape[0], k = a->val.shape[1], n = b->val.shape[0];
    Tensor out({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0;
            for (int t = 0; t < k; ++t) s += a->val[i * k + t] * b->val[j * k + t];
            out[static_cast<size_t>(i) * n + j] = s;
        }
    return make_node(std::move(out), {a, b}, [a, b, m, k, n](Node& nd) {
        if (a->requires_grad) {
            Tensor& ga = a->g();
            for (int i = 0; i < m; ++i)
                for (int t = 0; t < k; ++t) {
                    double s = 0;
                    for (int j = 0; j < n; ++j)
                        s += nd.grad[static_cast<size_t>(i) * n + j] * b->val[j * k + t];
                    ga[static_cast<size_t>(i) * k + t] += s;
                }
        }
        if (b->requires_grad) {
            Tensor& gb = b->g();
            for (int j = 0; j < n; ++j)
                for (int t = 0; t < k; ++t) {
                    double s = 0;
                    for (int i = 0; i < m; ++i)
                        s += a->val[i * k + t] * nd.grad[static_cast<size_t>(i) * n + j];
                    gb[static_cast<size_t>(j) * k + t] += s;
                }
        }
    });
}

Var softmax_rows(Var a) {
    if (a->val.shape.size() != 2) throw ShapeError("softmax_rows expects a 2-D tensor");
    int rows = a->val.shape[0], cols = a->val.shape[1];
    Tensor out = a->val;
    for (int r = 0; r < rows; ++r) {
        double* row = out.v.data() + static_cast<size_t>(r) * cols;
        double mx = row[0];
        for (int c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
        double s = 0;
        for (int c = 0; c < cols; ++c) {
            row[c] = std::exp(row[c] - mx);
            s += row[c];
        }
        for (int c = 0; c < cols; ++c) row[c] /= s;
    }
    return make_node(std::move(out), {a}, [a, rows, cols](Node& n) {
        Tensor& ga = a->g();
        for (int r = 0; r < rows; ++r) {
            const double* y = n.val.v.data() + static_cast<size_t>(r) * cols;
            const double* gy = n.grad.v.data() + static_cast<size_t>(r) * cols;
            double inner = 0;
            for (int c = 0; c < cols; ++c) inner += y[c] * gy[c];
            for (int c = 0; c < cols; ++c)
                ga[static_cast<size_t>(r) * cols + c] += y[c] * (gy[c] - inner);
        }
    });
}

Var l2_normalize(Var a) {
    double s = 0;
    for (double x : a->val.v) s += x * x;
    double norm = std::sqrt(s + 1e-12);
    Tensor out = a->val;
    for (double& x : out.v) x /= norm;
    return make_node(std::move(out), {a}, [a, norm](Node& n) {
        double inner = 0;
        for (size_t i = 0; i < n.val.size(); ++i) inner += n.val[i] * n.grad[i];
        for (size_t i = 0; i < n.val.size(); ++i)
            a->g()[i] += (n.grad[i] - n.val[i] * inner) / norm;
    });
}

Var transpose2d(Var a) {
    if (a->val.shape.size() != 2) throw ShapeError("transpose2d expects a 2-D tensor");
    int m = a->val.shape[0], n = a->val.shape[1];
    Tensor out({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<size_t>(j) * m + i] = a->val[static_cast<size_t>(i) * n + j];
    return make_node(std::move(out), {a}, [a, m, n](Node& nd) {
        Tensor& ga = a->g();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                ga[static_cast<size_t>(i) * n + j] += nd.grad[static_cast<size_t>(j) * m + i];
    });
}

Var add_rowvec(Var a, Var b) {
    if (a->val.shape.size() != 2 || b->val.size() != static_cast<size_t>(a->val.shape[1]))
        throw ShapeError("add_rowvec: incompatible shapes");
    int m = a->val.shape[0], n = a->val.shape[1];
    Tensor out = a->val;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<size_t>(i) * n + j] += b->val[j];
    return make_node(std::move(out), {a, b}, [a, b, m, n](Node& nd) {
        if (a->requires_grad)
            for (size_t i = 0; i < nd.grad.size(); ++i) a->g()[i] += nd.grad[i];
        if (b->requires_grad)
            for (int j = 0; j < n; ++j) {
                double s = 0;
                for (int i = 0; i < m; ++i) s += nd.grad[static_cast<size_t>(i) * n + j];
                b->g()[j] += s;
            }
    });
}

Var global_avgpool(Var a) {
    if (a->val.shape.size() != 3) throw ShapeError("global_avgpool expects [C,H,W]");
    int c = a->val.shape[0];
    size_t hw = static_cast<size_t>(a->val.shape[1]) * a->val.shape[2];
    Tensor out({1, c});
    for (int ci = 0; ci < c; ++ci) {
        double s = 0;
        for (size_t i = 0; i < hw; ++i) s += a->val[static_cast<size_t>(ci) * hw + i];
        out[ci] = s / static_cast<double>(hw);
    }
    return make_node(std::move(out), {a}, [a, c, hw](Node& nd) {
        Tensor& ga = a->g();
        for (int ci = 0; ci < c; ++ci) {
            double g = nd.grad[ci] / static_cast<double>(hw);
            for (size_t i = 0; i < hw; ++i) ga[static_cast<size_t>(ci) * hw + i] += g;
        }
    });
}

Var reshape(Var a, std::vector<int> shape) {
    if (Tensor::count(shape) != a->val.size()) throw ShapeError("reshape: element count differs");
    Tensor out;
    out.shape = std::move(shape);
    out.v = a->val.v;
    return make_node(std::move(out), {a}, [a](Node& n) {
        for (size_t i = 0; i < n.grad.size(); ++i) a->g()[i] += n.grad[i];
    });
}

Var concat_ch(Var a, Var b) {
    if (a->val.shape.size() != 3 || b->val.shape.size() != 3 ||
        a->val.shape[1] != b->val.shape[1] || a->val.shape[2] != b->val.shape[2])
        throw ShapeError("concat_ch: incompatible shapes");
    int ca = a->val.shape[0], cb = b->val.shape[0];
    int h = a->val.shape[1], w = a->val.shape[2];
    Tensor out({ca + cb, h, w});
    std::copy(a->val.v.begin(), a->val.v.end(), out.v.begin());
    std::copy(b->val.v.begin(), b->val.v.end(), out.v.begin() + a->val.size());
    return make_node(std::move(out), {a, b}, [a, b](Node& n) {
        size_t na = a->val.size();
        if (a->requires_grad)
            for (size_t i = 0; i < na; ++i) a->g()[i] += n.grad[i];
        if (b->requires_grad)
            for (size_t i = 0; i < b->val.size(); ++i) b->g()[i] += n.grad[na + i];
    });
}

Var crop_hw(Var a, int y0, int x0, int h, int w) {
    if (a->val.shape.size() != 3) throw ShapeError("crop_hw expects [C,H,W]");
    int c = a->val.shape[0], sh = a->val.shape[1], sw = a->val.shape[2];
    if (y0 < 0 || x0 < 0 || y0 + h > sh || x0 + w > sw) throw ShapeError("crop out of range");
    Tensor out({c, h, w});
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out[(static_cast<size_t>(ci) * h + y) * w + x] =
                    a->val[(static_cast<size_t>(ci) * sh + y0 + y) * sw + x0 + x];
    return make_node(std::move(out), {a}, [a, y0, x0, h, w, c, sh, sw](Node& n) {
        Tensor& ga = a->g();
        for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    ga[(static_cast<size_t>(ci) * sh + y0 + y) * sw + x0 + x] +=
                        n.grad[(static_cast<size_t>(ci) * h + y) * w + x];
    });
}

Var sub_colmean(Var a) {
    if (a->val.shape.size() != 2) throw ShapeError("sub_colmean expects [T,D]");
    int t = a->val.shape[0], d = a->val.shape[1];
    Tensor out = a->val;
    for (int c = 0; c < d; ++c) {
        double m = 0;
        for (int r = 0; r < t; ++r) m += a->val[static_cast<size_t>(r) * d + c];
        m /= t;
        for (int r = 0; r < t; ++r) out[static_cast<size_t>(r) * d + c] -= m;
    }
    return make_node(std::move(out), {a}, [a, t, d](Node& n) {
        Tensor& ga = a->g();
        for (int c = 0; c < d; ++c) {
            double gm = 0;
            for (int r = 0; r < t; ++r) gm += n.grad[static_cast<size_t>(r) * d + c];
            gm /= t;
            for (int r = 0; r < t; ++r)
                ga[static_cast<size_t>(r) * d + c] += n.grad[static_cast<size_t>(r) * d + c] - gm;
        }
    });
}

Var avgpool_rows2(Var a) {
    if (a->val.shape.size() != 2) throw ShapeError("avgpool_rows2 expects [T,D]");
    int t = a->val.shape[0], d = a->val.shape[1];
    int to = t / 2;
    if (to < 1) throw ShapeError("avgpool_rows2 needs at least two rows");
    Tensor out({to, d});
    for (int r = 0; r < to; ++r)
        for (int c = 0; c < d; ++c)
            out[static_cast<size_t>(r) * d + c] =
                0.5 * (a->val[static_cast<size_t>(2 * r) * d + c] +
                       a->val[static_cast<size_t>(2 * r + 1) * d + c]);
    return make_node(std::move(out), {a}, [a, to, d](Node& n) {
        Tensor& ga = a->g();
        for (int r = 0; r < to; ++r)
            for (int c = 0; c < d; ++c) {
                double g = 0.5 * n.grad[static_cast<size_t>(r) * d + c];
                ga[static_cast<size_t>(2 * r) * d + c] += g;
                ga[static_cast<size_t>(2 * r + 1) * d + c] += g;
            }
    });
}

Var adaptive_avgpool(Var a, int oh, int ow) {
    if (a->val.shape.size() != 3) throw ShapeError("adaptive_avgpool expects [C,H,W]");
    int c = a->val.shape[0], h = a->val.shape[1], w = a->val.shape[2];
    if (oh < 1 || ow < 1 || oh > h || ow > w) throw ShapeError("bad adaptive pool target");
    Tensor out({c, oh, ow});
    auto lo = [](int o, int n, int on) { return o * n / on; };
    auto hi = [](int o, int n, int on) { return (o + 1) * n / on; };
    for (int ci = 0; ci < c; ++ci)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                int y0 = lo(oy, h, oh), y1 = hi(oy, h, oh);
                int x0 = lo(ox, w, ow), x1 = hi(ox, w, ow);
                double s = 0;
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x)
                        s += a->val[(static_cast<size_t>(ci) * h + y) * w + x];
                out[(static_cast<size_t>(ci) * oh + oy) * ow + ox] =
                    s / ((y1 - y0) * (x1 - x0));
            }
    return make_node(std::move(out), {a}, [a, c, h, w, oh, ow](Node& n) {
        Tensor& ga = a->g();
        auto lo = [](int o, int nn, int on) { return o * nn / on; };
        auto hi = [](int o, int nn, int on) { return (o + 1) * nn / on; };
        for (int ci = 0; ci < c; ++ci)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    int y0 = lo(oy, h, oh), y1 = hi(oy, h, oh);
                    int x0 = lo(ox, w, ow), x1 = hi(ox, w, ow);
                    double g = n.grad[(static_cast<size_t>(ci) * oh + oy) * ow + ox] /
                               ((y1 - y0) * (x1 - x0));
                    for (int y = y0; y < y1; ++y)
                        for (int x = x0; x < x1; ++x)
                            ga[(static_cast<size_t>(ci) * h + y) * w + x] += g;
                }
    });
}

Var conv2d(Var x, Var w, Var b, int stride, int pad) {
    if (x->val.shape.size() != 3 || w->val.shape.size() != 4)
        throw ShapeError("conv2d expects x[C,H,W], w[Co,Ci,kh,kw]");
    int ci = x->val.shape[0], h = x->val.shape[1], wd = x->val.shape[2];
    int co = w->val.shape[0], kh = w->val.shape[2], kw = w->val.shape[3];
    if (w->val.shape[1] != ci) throw ShapeError("conv2d: channel mismatch");
    if (b->val.size() != static_cast<size_t>(co)) throw ShapeError("conv2d: bias size mismatch");
    int oh = (h + 2 * pad - kh) / stride + 1;
    int ow = (wd + 2 * pad - kw) / stride + 1;
    if (oh < 1 || ow < 1) throw ShapeError("conv2d: output would be empty");
    Tensor out({co, oh, ow});
    for (int o = 0; o < co; ++o) {
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double s = b->val[o];
                for (int c = 0; c < ci; ++c)
                    for (int ky = 0; ky < kh; ++ky) {
                        int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= wd) continue;
                            s += x->val[(static_cast<size_t>(c) * h + iy) * wd + ix] *
                                 w->val[((static_cast<size_t>(o) * ci + c) * kh + ky) * kw + kx];
                        }
                    }
                out[(static_cast<size_t>(o) * oh + oy) * ow + ox] = s;
            }
    }
    return make_node(std::move(out), {x, w, b},
                     [x, w, b, ci, h, wd, co, kh, kw, stride, pad](Node& n) {
        int oh = n.val.shape[1], ow = n.val.shape[2];
        for (int o = 0; o < co; ++o)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double go = n.grad[(static_cast<size_t>(o) * oh + oy) * ow + ox];
                    if (go == 0.0) continue;
                    if (b->requires_grad) b->g()[o] += go;
                    for (int c = 0; c < ci; ++c)
                        for (int ky = 0; ky < kh; ++ky) {
                            int iy = oy * stride - pad + ky;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                int ix = ox * stride - pad + kx;
                                if (ix < 0 || ix >= wd) continue;
                                size_t xi = (static_cast<size_t>(c) * h + iy) * wd + ix;
                                size_t wi = ((static_cast<size_t>(o) * ci + c) * kh + ky) * kw + kx;
                                if (x->requires_grad) x->g()[xi] += go * w->val[wi];
                                if (w->requires_grad) w->g()[wi] += go * x->val[xi];
                            }
                        }
                }
    });
}

Var conv_transpose2d(Var x, Var w, Var b, int stride, int pad) {
    if (x->val.shape.size() != 3 || w->val.shape.size() != 4)
        throw ShapeError("conv_transpose2d expects x[C,H,W], w[Ci,Co,kh,kw]");
    int ci = x->val.shape[0], h = x->val.shape[1], wd = x->val.shape[2];
    int co = w->val.shape[1], kh = w->val.shape[2], kw = w->val.shape[3];
    if (w->val.shape[0] != ci) throw ShapeError("conv_transpose2d: channel mismatch");
    if (b->val.size() != static_cast<size_t>(co))
        throw ShapeError("conv_transpose2d: bias size mismatch");
    int oh = (h - 1) * stride - 2 * pad + kh;
    int ow = (wd - 1) * stride - 2 * pad + kw;
    if (oh < 1 || ow < 1) throw ShapeError("conv_transpose2d: output would be empty");
    Tensor out({co, oh, ow});
    for (int o = 0; o < co; ++o)
        for (size_t i = 0; i < static_cast<size_t>(oh) * ow; ++i)
            out[static_cast<size_t>(o) * oh * ow + i] = b->val[o];
    for (int c = 0; c < ci; ++c)
        for (int iy = 0; iy < h; ++iy)
            for (int ix = 0; ix < wd; ++ix) {
                double xv = x->val[(static_cast<size_t>(c) * h + iy) * wd + ix];
                for (int o = 0; o < co; ++o)
                    for (int ky = 0; ky < kh; ++ky) {
                        int oy = iy * stride - pad + ky;
                        if (oy < 0 || oy >= oh) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            int ox = ix * stride - pad + kx;
                            if (ox < 0 || ox >= ow) continue;
                            out[(static_cast<size_t>(o) * oh + oy) * ow + ox] +=
                                xv * w->val[((static_cast<size_t>(c) * co + o) * kh + ky) * kw + kx];
                        }
                    }
            }
    return make_node(std::move(out), {x, w, b},
                     [x, w, b, ci, h, wd, co, kh, kw, stride, pad](Node& n) {
        int oh = n.val.shape[1], ow = n.val.shape[2];
        if (b->requires_grad) {
            for (int o = 0; o < co; ++o) {
                double s = 0;
                for (size_t i = 0; i < static_cast<size_t>(oh) * ow; ++i)
                    s += n.grad[static_cast<size_t>(o) * oh * ow + i];
                b->g()[o] += s;
            }
        }
        for (int c = 0; c < ci; ++c)
            for (int iy = 0; iy < h; ++iy)
                for (int ix = 0; ix < wd; ++ix) {
                    size_t xi = (static_cast<size_t>(c) * h + iy) * wd + ix;
                    double xv = x->val[xi];
                    double gx = 0;
                    for (int o = 0; o < co; ++o)
                        for (int ky = 0; ky < kh; ++ky) {
                            int oy = iy * stride - pad + ky;
                            if (oy < 0 || oy >= oh) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                int ox = ix * stride - pad + kx;
                                if (ox < 0 || ox >= ow) continue;
                                double go = n.grad[(static_cast<size_t>(o) * oh + oy) * ow + ox];
                                size_t wi = ((static_cast<size_t>(c) * co + o) * kh + ky) * kw + kx;
                                gx += go * w->val[wi];
                                if (w->requires_grad) w->g()[wi] += go * xv;
                            }
                        }
                    if (x->requires_grad) x->g()[xi] += gx;
                }
    });
}

}  // namespace avth::nn
