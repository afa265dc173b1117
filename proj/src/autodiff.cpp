#include "specrec/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace specrec {
namespace {

void require_chw(const Node* x, const char* op) {
    if (x->value.shape.size() != 3) throw std::invalid_argument(std::string(op) + ": expected a {C,H,W} tensor");
}

double stable_softplus(double x) {
    if (x > 30.0) return x;
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Node* Graph::append(Tensor value, bool requires_grad) {
    auto node = std::make_unique<Node>();
    node->grad = Tensor::zeros(value.shape);
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return nodes_.back().get();
}

Node* Graph::leaf(Tensor value, bool requires_grad) {
    return append(std::move(value), requires_grad);
}

Node* Graph::conv2d(Node* input, Node* weight, Node* bias) {
    require_chw(input, "conv2d");
    if (weight->value.shape.size() != 4) throw std::invalid_argument("conv2d: weight must be {Cout,Cin,k,k}");
    const int cin = input->value.shape[0], h = input->value.shape[1], w = input->value.shape[2];
    const int cout = weight->value.shape[0];
    const int k = weight->value.shape[2];
    if (weight->value.shape[1] != cin || weight->value.shape[3] != k) throw std::invalid_argument("conv2d: weight shape mismatch");
    if (k != 1 && k != 3) throw std::invalid_argument("conv2d: kernel must be 1 or 3");
    if (bias->value.shape != std::vector<int>{cout}) throw std::invalid_argument("conv2d: bias shape mismatch");
    const int pad = (k - 1) / 2;

    Tensor out({cout, h, w});
    for (int co = 0; co < cout; ++co) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double acc = bias->value[static_cast<std::size_t>(co)];
                for (int ci = 0; ci < cin; ++ci) {
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = y + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = x + kx - pad;
                            if (ix < 0 || ix >= w) continue;
                            acc += weight->value.data[((static_cast<std::size_t>(co) * cin + ci) * k + ky) * k + kx] *
                                   input->value.at3(ci, iy, ix);
                        }
                    }
                }
                out.at3(co, y, x) = acc;
            }
        }
    }

    Node* node = append(std::move(out), input->requires_grad || weight->requires_grad || bias->requires_grad);
    node->backprop = [node, input, weight, bias, cin, cout, h, w, k, pad]() {
        for (int co = 0; co < cout; ++co) {
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const double go = node->grad.at3(co, y, x);
                    if (go == 0.0) continue;
                    if (bias->requires_grad) bias->grad[static_cast<std::size_t>(co)] += go;
                    for (int ci = 0; ci < cin; ++ci) {
                        for (int ky = 0; ky < k; ++ky) {
                            const int iy = y + ky - pad;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < k; ++kx) {
                                const int ix = x + kx - pad;
                                if (ix < 0 || ix >= w) continue;
                                const std::size_t wi = ((static_cast<std::size_t>(co) * cin + ci) * k + ky) * k + kx;
                                if (weight->requires_grad) weight->grad.data[wi] += go * input->value.at3(ci, iy, ix);
                                if (input->requires_grad) input->grad.at3(ci, iy, ix) += go * weight->value.data[wi];
                            }
                        }
                    }
                }
            }
        }
    };
    return node;
}

Node* Graph::leaky_relu(Node* x, double slope) {
    Tensor out = x->value;
    for (double& v : out.data) v = v >= 0.0 ? v : slope * v;
    Node* node = append(std::move(out), x->requires_grad);
    node->backprop = [node, x, slope]() {
        if (!x->requires_grad) return;
        for (std::size_t i = 0; i < x->grad.numel(); ++i) {
            x->grad[i] += node->grad[i] * (x->value[i] >= 0.0 ? 1.0 : slope);
        }
    };
    return node;
}

Node* Graph::avgpool2(Node* x) {
    require_chw(x, "avgpool2");
    const int c = x->value.shape[0], h = x->value.shape[1], w = x->value.shape[2];
    if (h % 2 != 0 || w % 2 != 0) throw std::invalid_argument("avgpool2: spatial dims must be even");
    Tensor out({c, h / 2, w / 2});
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h / 2; ++y) {
            for (int xx = 0; xx < w / 2; ++xx) {
                out.at3(ch, y, xx) = 0.25 * (x->value.at3(ch, 2 * y, 2 * xx) + x->value.at3(ch, 2 * y, 2 * xx + 1) +
                                             x->value.at3(ch, 2 * y + 1, 2 * xx) + x->value.at3(ch, 2 * y + 1, 2 * xx + 1));
            }
        }
    }
    Node* node = append(std::move(out), x->requires_grad);
    node->backprop = [node, x, c, h, w]() {
        if (!x->requires_grad) return;
        for (int ch = 0; ch < c; ++ch) {
            for (int y = 0; y < h / 2; ++y) {
                for (int xx = 0; xx < w / 2; ++xx) {
                    const double g = 0.25 * node->grad.at3(ch, y, xx);
                    x->grad.at3(ch, 2 * y, 2 * xx) += g;
                    x->grad.at3(ch, 2 * y, 2 * xx + 1) += g;
                    x->grad.at3(ch, 2 * y + 1, 2 * xx) += g;
                    x->grad.at3(ch, 2 * y + 1, 2 * xx + 1) += g;
                }
            }
        }
    };
    return node;
}

Node* Graph::upsample2x(Node* x) {
    require_chw(x, "upsample2x");
    const int c = x->value.shape[0], h = x->value.shape[1], w = x->value.shape[2];
    const int oh = 2 * h, ow = 2 * w;

    // half-pixel source coordinates, clamped at the borders
    auto src = [](int o, int limit) {
        double s = (o + 0.5) / 2.0 - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(limit - 1));
        const int lo = static_cast<int>(s);
        const int hi = std::min(lo + 1, limit - 1);
        return std::tuple<int, int, double>(lo, hi, s - lo);
    };

    Tensor out({c, oh, ow});
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < oh; ++y) {
            const auto [y0, y1, wy] = src(y, h);
            for (int xx = 0; xx < ow; ++xx) {
                const auto [x0, x1, wx] = src(xx, w);
                out.at3(ch, y, xx) = (1.0 - wy) * ((1.0 - wx) * x->value.at3(ch, y0, x0) + wx * x->value.at3(ch, y0, x1)) +
                                     wy * ((1.0 - wx) * x->value.at3(ch, y1, x0) + wx * x->value.at3(ch, y1, x1));
            }
        }
    }
    Node* node = append(std::move(out), x->requires_grad);
    node->backprop = [node, x, c, h, oh, ow, src]() {
        if (!x->requires_grad) return;
        const int w = x->value.shape[2];
        for (int ch = 0; ch < c; ++ch) {
            for (int y = 0; y < oh; ++y) {
                const auto [y0, y1, wy] = src(y, h);
                for (int xx = 0; xx < ow; ++xx) {
                    const auto [x0, x1, wx] = src(xx, w);
                    const double g = node->grad.at3(ch, y, xx);
                    x->grad.at3(ch, y0, x0) += g * (1.0 - wy) * (1.0 - wx);
                    x->grad.at3(ch, y0, x1) += g * (1.0 - wy) * wx;
                    x->grad.at3(ch, y1, x0) += g * wy * (1.0 - wx);
                    x->grad.at3(ch, y1, x1) += g * wy * wx;
                }
            }
        }
    };
    return node;
}

Node* Graph::concat(const std::vector<Node*>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat: empty input list");
    require_chw(xs[0], "concat");
    const int h = xs[0]->value.shape[1], w = xs[0]->value.shape[2];
    int total_c = 0;
    bool rg = false;
    for (Node* x : xs) {
        require_chw(x, "concat");
        if (x->value.shape[1] != h || x->value.shape[2] != w) throw std::invalid_argument("concat: spatial mismatch");
        total_c += x->value.shape[0];
        rg = rg || x->requires_grad;
    }
    Tensor out({total_c, h, w});
    std::size_t offset = 0;
    for (Node* x : xs) {
        std::copy(x->value.data.begin(), x->value.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(offset));
        offset += x->value.numel();
    }
    Node* node = append(std::move(out), rg);
    std::vector<Node*> parents = xs;
    node->backprop = [node, parents]() {
        std::size_t offset = 0;
        for (Node* x : parents) {
            if (x->requires_grad) {
                for (std::size_t i = 0; i < x->grad.numel(); ++i) {
                    x->grad[i] += node->grad[offset + i];
                }
            }
            offset += x->value.numel();
        }
    };
    return node;
}

Node* Graph::dense(Node* x, Node* weight, Node* bias) {
    if (x->value.shape.size() != 1) throw std::invalid_argument("dense: input must be flat");
    const int n = x->value.shape[0];
    if (weight->value.shape.size() != 2 || weight->value.shape[1] != n) throw std::invalid_argument("dense: weight shape mismatch");
    const int m = weight->value.shape[0];
    if (bias->value.shape != std::vector<int>{m}) throw std::invalid_argument("dense: bias shape mismatch");

    Tensor out({m});
    for (int o = 0; o < m; ++o) {
        double acc = bias->value[static_cast<std::size_t>(o)];
        for (int i = 0; i < n; ++i) acc += weight->value.data[static_cast<std::size_t>(o) * n + i] * x->value[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(o)] = acc;
    }
    Node* node = append(std::move(out), x->requires_grad || weight->requires_grad || bias->requires_grad);
    node->backprop = [node, x, weight, bias, n, m]() {
        for (int o = 0; o < m; ++o) {
            const double go = node->grad[static_cast<std::size_t>(o)];
            if (go == 0.0) continue;
            if (bias->requires_grad) bias->grad[static_cast<std::size_t>(o)] += go;
            for (int i = 0; i < n; ++i) {
                if (weight->requires_grad) weight->grad.data[static_cast<std::size_t>(o) * n + i] += go * x->value[static_cast<std::size_t>(i)];
                if (x->requires_grad) x->grad[static_cast<std::size_t>(i)] += go * weight->value.data[static_cast<std::size_t>(o) * n + i];
            }
        }
    };
    return node;
}

Node* Graph::global_avg_pool(Node* x) {
    require_chw(x, "global_avg_pool");
    const int c = x->value.shape[0], h = x->value.shape[1], w = x->value.shape[2];
    const double inv = 1.0 / (static_cast<double>(h) * w);
    Tensor out({c});
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int y = 0; y < h; ++y) {
            for (int xx = 0; xx < w; ++xx) acc += x->value.at3(ch, y, xx);
        }
        out[static_cast<std::size_t>(ch)] = acc * inv;
    }
    Node* node = append(std::move(out), x->requires_grad);
    node->backprop = [node, x, c, h, w, inv]() {
        if (!x->requires_grad) return;
        for (int ch = 0; ch < c; ++ch) {
            const double g = node->grad[static_cast<std::size_t>(ch)] * inv;
            for (int y = 0; y < h; ++y) {
                for (int xx = 0; xx < w; ++xx) x->grad.at3(ch, y, xx) += g;
            }
        }
    };
    return node;
}

Node* Graph::softplus(Node* x) {
    Tensor out = x->value;
    for (double& v : out.data) v = stable_softplus(v);
    Node* node = append(std::move(out), x->requires_grad);
    node->backprop = [node, x]() {
        if (!x->requires_grad) return;
        for (std::size_t i = 0; i < x->grad.numel(); ++i) {
            x->grad[i] += node->grad[i] * sigmoid(x->value[i]);
        }
    };
    return node;
}

Node* Graph::add(Node* a, Node* b) {
    if (!a->value.same_shape(b->value)) throw std::invalid_argument("add: shape mismatch");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b->value[i];
    Node* node = append(std::move(out), a->requires_grad || b->requires_grad);
    node->backprop = [node, a, b]() {
        for (std::size_t i = 0; i < node->grad.numel(); ++i) {
            if (a->requires_grad) a->grad[i] += node->grad[i];
            if (b->requires_grad) b->grad[i] += node->grad[i];
        }
    };
    return node;
}

Node* Graph::sub(Node* a, Node* b) {
    if (!a->value.same_shape(b->value)) throw std::invalid_argument("sub: shape mismatch");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b->value[i];
    Node* node = append(std::move(out), a->requires_grad || b->requires_grad);
    node->backprop = [node, a, b]() {
        for (std::size_t i = 0; i < node->grad.numel(); ++i) {
            if (a->requires_grad) a->grad[i] += node->grad[i];
            if (b->requires_grad) b->grad[i] -= node->grad[i];
        }
    };
    return node;
}

Node* Graph::mul(Node* a, Node* b) {
    if (!a->value.same_shape(b->value)) throw std::invalid_argument("mul: shape mismatch");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b->value[i];
    Node* node = append(std::move(out), a->requires_grad || b->requires_grad);
    node->backprop = [node, a, b]() {
        for (std::size_t i = 0; i < node->grad.numel(); ++i) {
            if (a->requires_grad) a->grad[i] += node->grad[i] * b->value[i];
            if (b->requires_grad) b->grad[i] += node->grad[i] * a->value[i];
        }
    };
    return node;
}

Node* Graph::scale(Node* x, double c) {
    Tensor out = x->value;
    for (double& v : out.data) v *= c;
    Node* node = append(std::move(out), x->requires_grad);
    node->backprop = [node, x, c]() {
        if (!x->requires_grad) return;
        for (std::size_t i = 0; i < node->grad.numel(); ++i) x->grad[i] += node->grad[i] * c;
    };
    return node;
}

Node* Graph::add_const(Node* x, const Tensor& t) {
    if (!x->value.same_shape(t)) throw std::invalid_argument("add_const: shape mismatch");
    Tensor out = x->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += t[i];
    Node* node = append(std::move(out), x->requires_grad);
    node->backprop = [node, x]() {
        if (!x->requires_grad) return;
        for (std::size_t i = 0; i < node->grad.numel(); ++i) x->grad[i] += node->grad[i];
    };
    return node;
}

Node* Graph::scale_by(Node* scalar, const Tensor& t) {
    if (scalar->value.shape != std::vector<int>{1}) throw std::invalid_argument("scale_by: scalar node must have shape {1}");
    Tensor out = t;
    const double s = scalar->value[0];
    for (double& v : out.data) v *= s;
    Node* node = append(std::move(out), scalar->requires_grad);
    const Tensor constant = t;
    node->backprop = [node, scalar, constant]() {
        if (!scalar->requires_grad) return;
        double acc = 0.0;
        for (std::size_t i = 0; i < node->grad.numel(); ++i) acc += node->grad[i] * constant[i];
        scalar->grad[0] += acc;
    };
    return node;
}

Node* Graph::l1_loss(Node* pred, const Tensor& target) {
    if (!pred->value.same_shape(target)) throw std::invalid_argument("l1_loss: shape mismatch");
    const double inv = 1.0 / static_cast<double>(pred->value.numel());
    double acc = 0.0;
    for (std::size_t i = 0; i < pred->value.numel(); ++i) acc += std::abs(pred->value[i] - target[i]);
    Node* node = append(Tensor::scalar(acc * inv), pred->requires_grad);
    const Tensor t = target;
    node->backprop = [node, pred, t, inv]() {
        if (!pred->requires_grad) return;
        const double g = node->grad[0] * inv;
        for (std::size_t i = 0; i < pred->grad.numel(); ++i) {
            const double d = pred->value[i] - t[i];
            pred->grad[i] += g * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
        }
    };
    return node;
}

void Graph::backward(Node* loss) {
    if (backward_done_) throw std::logic_error("backward: graph already swept");
    if (loss->value.shape != std::vector<int>{1}) throw std::invalid_argument("backward: loss must be scalar");
    backward_done_ = true;
    loss->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node* n = it->get();
        if (n->requires_grad && n->backprop) n->backprop();
    }
}

}  // namespace specrec
