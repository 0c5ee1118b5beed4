#include "icsd/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace icsd::nn {

Graph::NodeId Graph::push(Tensor val, std::function<void(Graph&)> back) {
    Node n;
    n.grad.assign(val.size(), 0.0);
    n.val = std::move(val);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
}

Graph::NodeId Graph::input(Tensor t) { return push(std::move(t), nullptr); }

Graph::NodeId Graph::matmul(NodeId x, NodeId w) {
    const Tensor& a = nodes_[x].val;
    const Tensor& b = nodes_[w].val;
    require(a.shape.size() == 2 && b.shape.size() == 2 && a.shape[1] == b.shape[0],
            "matmul shape mismatch");
    const size_t B = a.shape[0], I = a.shape[1], O = b.shape[1];
    Tensor out({B, O});
    for (size_t r = 0; r < B; ++r) {
        const double* ar = a.v.data() + r * I;
        double* orow = out.v.data() + r * O;
        for (size_t i = 0; i < I; ++i) {
            double av = ar[i];
            const double* brow = b.v.data() + i * O;
            for (size_t o = 0; o < O; ++o) orow[o] += av * brow[o];
        }
    }
    NodeId id = push(std::move(out), nullptr);
    nodes_[id].back = [id, x, w, B, I, O](Graph& g) {
        const auto& go = g.nodes_[id].grad;
        const auto& a = g.nodes_[x].val.v;
        const auto& b = g.nodes_[w].val.v;
        auto& ga = g.nodes_[x].grad;
        auto& gb = g.nodes_[w].grad;
        for (size_t r = 0; r < B; ++r) {
            const double* gor = go.data() + r * O;
            const double* ar = a.data() + r * I;
            double* gar = ga.data() + r * I;
            for (size_t i = 0; i < I; ++i) {
                const double* brow = b.data() + i * O;
                double* gbrow = gb.data() + i * O;
                double acc = 0.0;
                double av = ar[i];
                for (size_t o = 0; o < O; ++o) {
                    acc += gor[o] * brow[o];
                    gbrow[o] += gor[o] * av;
                }
                gar[i] += acc;
            }
        }
    };
    return id;
}

Graph::NodeId Graph::add_row(NodeId x, NodeId b) {
    const Tensor& a = nodes_[x].val;
    const Tensor& bias = nodes_[b].val;
    require(a.shape.size() >= 1 && a.shape.back() == bias.size(), "bias shape mismatch");
    const size_t O = bias.size(), R = a.size() / O;
    Tensor out = a;
    for (size_t r = 0; r < R; ++r)
        for (size_t o = 0; o < O; ++o) out.v[r * O + o] += bias.v[o];
    NodeId id = push(std::move(out), nullptr);
    nodes_[id].back = [id, x, b, R, O](Graph& g) {
        const auto& go = g.nodes_[id].grad;
        auto& gx = g.nodes_[x].grad;
        auto& gb = g.nodes_[b].grad;
        for (size_t r = 0; r < R; ++r)
            for (size_t o = 0; o < O; ++o) {
                gx[r * O + o] += go[r * O + o];
                gb[o] += go[r * O + o];
            }
    };
    return id;
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
    const Tensor& ta = nodes_[a].val;
    const Tensor& tb = nodes_[b].val;
    require(ta.size() == tb.size(), "add shape mismatch");
    Tensor out = ta;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] += tb.v[i];
    NodeId id = push(std::move(out), nullptr);
    nodes_[id].back = [id, a, b](Graph& g) {
        const auto& go = g.nodes_[id].grad;
        auto& ga = g.nodes_[a].grad;
        auto& gb = g.nodes_[b].grad;
        for (size_t i = 0; i < go.size(); ++i) {
            ga[i] += go[i];
            gb[i] += go[i];
        }
    };
    return id;
}

Graph::NodeId Graph::sub(NodeId a, NodeId b) {
    const Tensor& ta = nodes_[a].val;
    const Tensor& tb = nodes_[b].val;
    require(ta.size() == tb.size(), "sub shape mismatch");
    Tensor out = ta;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] -= tb.v[i];
    NodeId id = push(std::move(out), nullptr);
    nodes_[id].back = [id, a, b](Graph& g) {
        const auto& go = g.nodes_[id].grad;
        auto& ga = g.nodes_[a].grad;
        auto& gb = g.nodes_[b].grad;
        for (size_t i = 0; i < go.size(); ++i) {
            ga[i] += go[i];
            gb[i] -= go[i];
        }
    };
    return id;
}

Graph::NodeId Graph::scale_last_dim(NodeId x, const Tensor& s) {
    const Tensor& a = nodes_[x].val;
    require(!a.shape.empty() && a.shape.back() == s.size(), "scale vector shape mismatch");
    const size_t O = s.size(), R = a.size() / O;
    Tensor out = a;
    for (size_t r = 0; r < R; ++r)
        for (size_t o = 0; o < O; ++o) out.v[r * O + o] *= s.v[o];
    NodeId id = push(std::move(out), nullptr);
    std::vector<double> sv = s.v;
    nodes_[id].back = [id, x, sv, R, O](Graph& g) {
        const auto& go = g.nodes_[id].grad;
        auto& gx = g.nodes_[x].grad;
        for (size_t r = 0; r < R; ++r)
            for (size_t o = 0; o < O; ++o) gx[r * O + o] += go[r * O + o] * sv[o];
    };
    return id;
}

Graph::NodeId Graph::mul_const(NodeId x, const Tensor& mask) {
    const Tensor& a = nodes_[x].val;
    require(a.size() == mask.size(), "mask shape mismatch");
    Tensor out = a;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] *= mask.v[i];
    NodeId id = push(std::move(out), nullptr);
    std::vector<double> mv = mask.v;
    nodes_[id].back = [id, x, mv](Graph& g) {
        const auto& go = g.nodes_[id].grad;
        auto& gx = g.nodes_[x].grad;
        for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * mv[i];
    };
    return id;
}

Graph::NodeId Graph::relu(NodeId x) {
    Tensor out = nodes_[x].val;
    for (double& v : out.v) v = v > 0.0 ? v : 0.0;
    NodeId id = push(std::move(out), nullptr);
    nodes_[id].back = [id, x](Graph& g) {
        const auto& go = g.nodes_[id].grad;
        const auto& xv = g.nodes_[x].val.v;
        auto& gx = g.nodes_[x].grad;
        for (size_t i = 0; i < go.size(); ++i)
            if (xv[i] > 0.0) gx[i] += go[i];
    };
    return id;
}

Graph::NodeId Graph::tanh_act(NodeId x) {
    Tensor out = nodes_[x].val;
    for (double& v : out.v) v = std::tanh(v);
    NodeId id = push(std::move(out), nullptr);
    nodes_[id].back = [id, x](Graph& g) {
        const auto& go = g.nodes_[id].grad;
        const auto& ov = g.nodes_[id].val.v;
        auto& gx = g.nodes_[x].grad;
        for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * (1.0 - ov[i] * ov[i]);
    };
    return id;
}

Graph::NodeId Graph::gaussian_noise(NodeId x, double sigma, Rng& rng, bool training) {
    if (!training || sigma <= 0.0) return x;
    Tensor out = nodes_[x].val;
    for (double& v : out.v) v += rng.gaussian(0.0, sigma);
    NodeId id = push(std::move(out), nullptr);
    nodes_[id].back = [id, x](Graph& g) {
        const auto& go = g.nodes_[id].grad;
        auto& gx = g.nodes_[x].grad;
        for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    };
    return id;
}

Graph::NodeId Graph::conv1d(NodeId x, NodeId kernels) {
    const Tensor& a = nodes_[x].val;
    const Tensor& k = nodes_[kernels].val;
    require(a.shape.size() == 3 && k.shape.size() == 3, "conv1d expects (B,L,C) and (K,W,C)");
    const size_t B = a.shape[0], L = a.shape[1], C = a.shape[2];
    const size_t K = k.shape[0], W = k.shape[1];
    require(k.shape[2] == C, "conv1d channel mismatch");
    require(W <= L, "conv1d kernel wider than input");
    const size_t Lo = L - W + 1;
    Tensor out({B, Lo, K});
    for (size_t b = 0; b < B; ++b)
        for (size_t t = 0; t < Lo; ++t)
            for (size_t f = 0; f < K; ++f) {
                double acc = 0.0;
                for (size_t w = 0; w < W; ++w) {
                    const double* xr = a.v.data() + (b * L + t + w) * C;
                    const double* kr = k.v.data() + (f * W + w) * C;
                    for (size_t c = 0; c < C; ++c) acc += xr[c] * kr[c];
                }
                out.v[(b * Lo + t) * K + f] = acc;
            }
    NodeId id = push(std::move(out), nullptr);
    nodes_[id].back = [id, x, kernels, B, L, C, K, W, Lo](Graph& g) {
        const auto& go = g.nodes_[id].grad;
        const auto& xv = g.nodes_[x].val.v;
        const auto& kv = g.nodes_[kernels].val.v;
        auto& gx = g.nodes_[x].grad;
        auto& gk = g.nodes_[kernels].grad;
        for (size_t b = 0; b < B; ++b)
            for (size_t t = 0; t < Lo; ++t)
                for (size_t f = 0; f < K; ++f) {
                    double gv = go[(b * Lo + t) * K + f];
                    if (gv == 0.0) continue;
                    for (size_t w = 0; w < W; ++w) {
                        double* gxr = gx.data() + (b * L + t + w) * C;
                        double* gkr = gk.data() + (f * W + w) * C;
                        const double* xr = xv.data() + (b * L + t + w) * C;
                        const double* kr = kv.data() + (f * W + w) * C;
                        for (size_t c = 0; c < C; ++c) {
                            gxr[c] += gv * kr[c];
                            gkr[c] += gv * xr[c];
                        }
                    }
                }
    };
    return id;
}

Graph::NodeId Graph::bias_channels(NodeId x, NodeId b) { return add_row(x, b); }

Graph::NodeId Graph::maxpool1d(NodeId x, size_t width) {
    const Tensor& a = nodes_[x].val;
    require(a.shape.size() == 3 && width >= 1, "maxpool expects (B,L,C)");
    const size_t B = a.shape[0], L = a.shape[1], C = a.shape[2];
    require(L >= width, "maxpool window longer than input");
    const size_t Lo = L / width;
    Tensor out({B, Lo, C});
    std::vector<size_t> argmax(out.size());
    for (size_t b = 0; b < B; ++b)
        for (size_t t = 0; t < Lo; ++t)
            for (size_t c = 0; c < C; ++c) {
                size_t best = (b * L + t * width) * C + c;
                double bv = a.v[best];
                for (size_t w = 1; w < width; ++w) {
                    size_t idx = (b * L + t * width + w) * C + c;
                    if (a.v[idx] > bv) {
                        bv = a.v[idx];
                        best = idx;
                    }
                }
                out.v[(b * Lo + t) * C + c] = bv;
                argmax[(b * Lo + t) * C + c] = best;
            }
    NodeId id = push(std::move(out), nullptr);
    nodes_[id].back = [id, x, argmax](Graph& g) {
        const auto& go = g.nodes_[id].grad;
        auto& gx = g.nodes_[x].grad;
        for (size_t i = 0; i < go.size(); ++i) gx[argmax[i]] += go[i];
    };
    return id;
}

Graph::NodeId Graph::pad_time(NodeId x, size_t lo, size_t hi) {
    const Tensor& a = nodes_[x].val;
    require(a.shape.size() == 3, "pad_time expects (B,L,C)");
    const size_t B = a.shape[0], L = a.shape[1], C = a.shape[2];
    const size_t Lo = L + lo + hi;
    Tensor out({B, Lo, C});
    for (size_t b = 0; b < B; ++b)
        for (size_t t = 0; t < L; ++t)
            for (size_t c = 0; c < C; ++c)
                out.v[(b * Lo + t + lo) * C + c] = a.v[(b * L + t) * C + c];
    NodeId id = push(std::move(out), nullptr);
    nodes_[id].back = [id, x, B, L, C, Lo, lo](Graph& g) {
        const auto& go = g.nodes_[id].grad;
        auto& gx = g.nodes_[x].grad;
        for (size_t b = 0; b < B; ++b)
            for (size_t t = 0; t < L; ++t)
                for (size_t c = 0; c < C; ++c)
                    gx[(b * L + t) * C + c] += go[(b * Lo + t + lo) * C + c];
    };
    return id;
}

Graph::NodeId Graph::reshape(NodeId x, std::vector<size_t> shape) {
    const Tensor& a = nodes_[x].val;
    require(Tensor::numel(shape) == a.size(), "reshape element count mismatch");
    Tensor out(std::move(shape), a.v);
    NodeId id = push(std::move(out), nullptr);
    nodes_[id].back = [id, x](Graph& g) {
        const auto& go = g.nodes_[id].grad;
        auto& gx = g.nodes_[x].grad;
        for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    };
    return id;
}

Graph::NodeId Graph::gather_windows(NodeId x, const std::vector<size_t>& starts, size_t len) {
    const Tensor& a = nodes_[x].val;
    require(a.shape.size() == 2, "gather_windows expects (T,F)");
    const size_t T = a.shape[0], F = a.shape[1], B = starts.size();
    for (size_t s : starts) require(s + len <= T, "window exceeds input length");
    Tensor out({B, len, F});
    for (size_t b = 0; b < B; ++b)
        for (size_t i = 0; i < len; ++i)
            for (size_t f = 0; f < F; ++f)
                out.v[(b * len + i) * F + f] = a.v[(starts[b] + i) * F + f];
    NodeId id = push(std::move(out), nullptr);
    std::vector<size_t> st = starts;
    nodes_[id].back = [id, x, st, len, F](Graph& g) {
        const auto& go = g.nodes_[id].grad;
        auto& gx = g.nodes_[x].grad;
        for (size_t b = 0; b < st.size(); ++b)
            for (size_t i = 0; i < len; ++i)
                for (size_t f = 0; f < F; ++f)
                    gx[(st[b] + i) * F + f] += go[(b * len + i) * F + f];
    };
    return id;
}

Graph::NodeId Graph::scatter_mean(NodeId x, const std::vector<size_t>& starts, size_t total_rows) {
    const Tensor& a = nodes_[x].val;
    require(a.shape.size() == 3 && a.shape[0] == starts.size(), "scatter_mean expects (B,m,F)");
    const size_t B = a.shape[0], m = a.shape[1], F = a.shape[2];
    std::vector<double> count(total_rows, 0.0);
    for (size_t b = 0; b < B; ++b) {
        require(starts[b] + m <= total_rows, "scatter target out of range");
        for (size_t i = 0; i < m; ++i) count[starts[b] + i] += 1.0;
    }
    Tensor out({total_rows, F});
    for (size_t b = 0; b < B; ++b)
        for (size_t i = 0; i < m; ++i) {
            size_t t = starts[b] + i;
            for (size_t f = 0; f < F; ++f)
                out.v[t * F + f] += a.v[(b * m + i) * F + f] / count[t];
        }
    NodeId id = push(std::move(out), nullptr);
    std::vector<size_t> st = starts;
    nodes_[id].back = [id, x, st, m, F, count](Graph& g) {
        const auto& go = g.nodes_[id].grad;
        auto& gx = g.nodes_[x].grad;
        for (size_t b = 0; b < st.size(); ++b)
            for (size_t i = 0; i < m; ++i) {
                size_t t = st[b] + i;
                for (size_t f = 0; f < F; ++f)
                    gx[(b * m + i) * F + f] += go[t * F + f] / count[t];
            }
    };
    return id;
}

Graph::NodeId Graph::time_diff(NodeId x) {
    const Tensor& a = nodes_[x].val;
    require(a.shape.size() == 3, "time_diff expects (B,L,C)");
    const size_t B = a.shape[0], L = a.shape[1], C = a.shape[2];
    Tensor out({B, L, C});
    for (size_t b = 0; b < B; ++b)
        for (size_t t = 1; t < L; ++t)
            for (size_t c = 0; c < C; ++c)
                out.v[(b * L + t) * C + c] =
                    a.v[(b * L + t) * C + c] - a.v[(b * L + t - 1) * C + c];
    NodeId id = push(std::move(out), nullptr);
    nodes_[id].back = [id, x, B, L, C](Graph& g) {
        const auto& go = g.nodes_[id].grad;
        auto& gx = g.nodes_[x].grad;
        for (size_t b = 0; b < B; ++b)
            for (size_t t = 1; t < L; ++t)
                for (size_t c = 0; c < C; ++c) {
                    double gv = go[(b * L + t) * C + c];
                    gx[(b * L + t) * C + c] += gv;
                    gx[(b * L + t - 1) * C + c] -= gv;
                }
    };
    return id;
}

Graph::NodeId Graph::concat_last_dim(NodeId a, NodeId b) {
    const Tensor& ta = nodes_[a].val;
    const Tensor& tb = nodes_[b].val;
    require(ta.shape.size() == tb.shape.size() && ta.shape.size() >= 1, "concat rank mismatch");
    for (size_t i = 0; i + 1 < ta.shape.size(); ++i)
        require(ta.shape[i] == tb.shape[i], "concat leading dims differ");
    const size_t Ca = ta.shape.back(), Cb = tb.shape.back();
    const size_t R = ta.size() / Ca;
    std::vector<size_t> shape = ta.shape;
    shape.back() = Ca + Cb;
    Tensor out(std::move(shape));
    for (size_t r = 0; r < R; ++r) {
        for (size_t c = 0; c < Ca; ++c) out.v[r * (Ca + Cb) + c] = ta.v[r * Ca + c];
        for (size_t c = 0; c < Cb; ++c) out.v[r * (Ca + Cb) + Ca + c] = tb.v[r * Cb + c];
    }
    NodeId id = push(std::move(out), nullptr);
    nodes_[id].back = [id, a, b, R, Ca, Cb](Graph& g) {
        const auto& go = g.nodes_[id].grad;
        auto& ga = g.nodes_[a].grad;
        auto& gb = g.nodes_[b].grad;
        for (size_t r = 0; r < R; ++r) {
            for (size_t c = 0; c < Ca; ++c) ga[r * Ca + c] += go[r * (Ca + Cb) + c];
            for (size_t c = 0; c < Cb; ++c) gb[r * Cb + c] += go[r * (Ca + Cb) + Ca + c];
        }
    };
    return id;
}

Graph::NodeId Graph::abs_val(NodeId x) {
    Tensor out = nodes_[x].val;
    for (double& v : out.v) v = std::fabs(v);
    NodeId id = push(std::move(out), nullptr);
    nodes_[id].back = [id, x](Graph& g) {
        const auto& go = g.nodes_[id].grad;
        const auto& xv = g.nodes_[x].val.v;
        auto& gx = g.nodes_[x].grad;
        for (size_t i = 0; i < go.size(); ++i) {
            if (xv[i] > 0.0)
                gx[i] += go[i];
            else if (xv[i] < 0.0)
                gx[i] -= go[i];
        }
    };
    return id;
}

Graph::NodeId Graph::reduce_max(NodeId x) {
    const Tensor& a = nodes_[x].val;
    require(!a.v.empty(), "reduce_max of empty tensor");
    size_t arg = 0;
    for (size_t i = 1; i < a.v.size(); ++i)
        if (a.v[i] > a.v[arg]) arg = i;
    Tensor out({1});
    out.v[0] = a.v[arg];
    NodeId id = push(std::move(out), nullptr);
    nodes_[id].back = [id, x, arg](Graph& g) { g.nodes_[x].grad[arg] += g.nodes_[id].grad[0]; };
    return id;
}

Graph::NodeId Graph::mse(NodeId pred, NodeId target) {
    const Tensor& p = nodes_[pred].val;
    const Tensor& t = nodes_[target].val;
    require(p.size() == t.size() && !p.v.empty(), "mse shape mismatch");
    const double n = static_cast<double>(p.size());
    double acc = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        double d = p.v[i] - t.v[i];
        acc += d * d;
    }
    Tensor out({1});
    out.v[0] = acc / n;
    NodeId id = push(std::move(out), nullptr);
    nodes_[id].back = [id, pred, target, n](Graph& g) {
        double go = g.nodes_[id].grad[0];
        const auto& pv = g.nodes_[pred].val.v;
        const auto& tv = g.nodes_[target].val.v;
        auto& gp = g.nodes_[pred].grad;
        auto& gt = g.nodes_[target].grad;
        for (size_t i = 0; i < pv.size(); ++i) {
            double d = 2.0 * (pv[i] - tv[i]) / n;
            gp[i] += go * d;
            gt[i] -= go * d;
        }
    };
    return id;
}

void Graph::backward(NodeId root) {
    require(root >= 0 && root < static_cast<NodeId>(nodes_.size()), "bad node id");
    require(nodes_[root].val.size() == 1, "backward root must be scalar");
    for (auto& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), 0.0);
    nodes_[root].grad[0] = 1.0;
    for (NodeId id = root; id >= 0; --id)
        if (nodes_[id].back) nodes_[id].back(*this);
}

} // namespace icsd::nn
