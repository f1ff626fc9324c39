#include "gnnstrat/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace gnnstrat {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ShapeError(what);
}

std::vector<std::uint32_t> to_vector(std::span<const std::uint32_t> s) { return {s.begin(), s.end()}; }

}  // namespace

Tape::~Tape() { clear(); }

Tensor Tape::record(Matrix value, std::initializer_list<Tensor> inputs, BackwardFn backward) {
    const bool tracked =
        recording_ && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
    Tensor out(std::move(value), tracked);
    if (!tracked) return out;
    out.node_->tape = this;
    out.node_->tape_position = entries_.size();
    entries_.push_back(Entry{out.node_, std::move(backward)});
    return out;
}

Matrix& Tape::grad_buffer(const Tensor& t) {
    auto& node = *t.node_;
    if (node.grad.empty()) node.grad = Matrix(node.value.rows(), node.value.cols());
    return node.grad;
}

void Tape::backward(const Tensor& loss) {
    const auto& node = *loss.node_;
    if (node.tape != this || node.tape_position >= entries_.size() || entries_[node.tape_position].output != loss.node_) {
        throw AutodiffError("backward called on a tensor that was not produced by this tape");
    }
    if (node.value.rows() != 1 || node.value.cols() != 1) {
        throw AutodiffError("backward requires a scalar (1x1) loss, got " + node.value.shape_string());
    }
    grad_buffer(loss)(0, 0) += 1.0;
    for (std::size_t i = node.tape_position + 1; i-- > 0;) {
        auto& entry = entries_[i];
        if (entry.output->grad.empty()) continue;
        entry.backward(entry.output->grad);
    }
    clear();
}

void Tape::clear() {
    for (auto& e : entries_) e.output->tape = nullptr;
    entries_.clear();
}

namespace {

// Visits (i, k, a_ik) for every nonzero of a, in row-major order.
template <typename Fn>
void for_each_nonzero(const Tensor& a, Fn&& fn) {
    const Matrix& av = a.value();
    if (const RowSparsity* index = a.nonzero_index()) {
        for (std::size_t i = 0; i < av.rows(); ++i) {
            for (std::size_t e = index->row_ptr[i]; e < index->row_ptr[i + 1]; ++e) fn(i, index->cols[e], av(i, index->cols[e]));
        }
        return;
    }
    for (std::size_t i = 0; i < av.rows(); ++i) {
        const auto arow = av.row(i);
        for (std::size_t k = 0; k < arow.size(); ++k) {
            if (arow[k] != 0.0) fn(i, k, arow[k]);
        }
    }
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
    require(a.cols() == b.rows(),
            "matmul shape mismatch: " + a.value().shape_string() + " x " + b.value().shape_string());
    const std::size_t p = a.rows(), r = b.cols();
    const Matrix& bv = b.value();
    Matrix c(p, r);
    // i-k-j order; zero entries of the left operand are skipped (bag-of-words inputs are mostly zero).
    for_each_nonzero(a, [&](std::size_t i, std::size_t k, double aik) {
        auto crow = c.row(i);
        const auto brow = bv.row(k);
        for (std::size_t j = 0; j < r; ++j) crow[j] += aik * brow[j];
    });
    return tape.record(std::move(c), {a, b}, [a, b](const Matrix& dc) {
        const Matrix& av = a.value();
        const Matrix& bv = b.value();
        if (a.requires_grad()) {
            Matrix& da = Tape::grad_buffer(a);
            for (std::size_t i = 0; i < av.rows(); ++i) {
                const auto dcrow = dc.row(i);
                auto darow = da.row(i);
                for (std::size_t k = 0; k < av.cols(); ++k) {
                    const auto brow = bv.row(k);
                    double s = 0.0;
                    for (std::size_t j = 0; j < bv.cols(); ++j) s += dcrow[j] * brow[j];
                    darow[k] += s;
                }
            }
        }
        if (b.requires_grad()) {
            Matrix& db = Tape::grad_buffer(b);
            for_each_nonzero(a, [&](std::size_t i, std::size_t k, double aik) {
                const auto dcrow = dc.row(i);
                auto dbrow = db.row(k);
                for (std::size_t j = 0; j < bv.cols(); ++j) dbrow[j] += aik * dcrow[j];
            });
        }
    });
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    require(a.value().same_shape(b.value()),
            "add shape mismatch: " + a.value().shape_string() + " vs " + b.value().shape_string());
    Matrix c = a.value();
    const auto bd = b.value().data();
    auto cd = c.data();
    for (std::size_t i = 0; i < cd.size(); ++i) cd[i] += bd[i];
    return tape.record(std::move(c), {a, b}, [a, b](const Matrix& dc) {
        for (const Tensor* t : {&a, &b}) {
            if (!t->requires_grad()) continue;
            auto g = Tape::grad_buffer(*t).data();
            const auto d = dc.data();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += d[i];
        }
    });
}

Tensor sum(Tape& tape, const Tensor& x) {
    double s = 0.0;
    for (double v : x.value().data()) s += v;
    return tape.record(Matrix(1, 1, s), {x}, [x](const Matrix& dc) {
        const double d = dc(0, 0);
        for (double& g : Tape::grad_buffer(x).data()) g += d;
    });
}

Tensor scale(Tape& tape, const Tensor& x, double factor) {
    Matrix y = x.value();
    for (double& v : y.data()) v *= factor;
    return tape.record(std::move(y), {x}, [x, factor](const Matrix& dy) {
        auto g = Tape::grad_buffer(x).data();
        const auto d = dy.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * d[i];
    });
}

Tensor activate(Tape& tape, const Tensor& x, Activation act) {
    if (!std::isfinite(act.slope)) throw std::invalid_argument("activation parameter must be finite");
    Matrix y = x.value();
    switch (act.kind) {
        case ActivationKind::relu:
            for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
            break;
        case ActivationKind::leaky_relu:
            for (double& v : y.data()) v = v > 0.0 ? v : act.slope * v;
            break;
        case ActivationKind::elu:
            for (double& v : y.data()) v = v > 0.0 ? v : act.slope * std::expm1(v);
            break;
    }
    return tape.record(std::move(y), {x}, [x, act](const Matrix& dy) {
        // Derivative at exactly 0 is taken from the negative side.
        auto g = Tape::grad_buffer(x).data();
        const auto xv = x.value().data();
        const auto d = dy.data();
        for (std::size_t i = 0; i < g.size(); ++i) {
            double slope = 1.0;
            if (xv[i] <= 0.0) {
                switch (act.kind) {
                    case ActivationKind::relu: slope = 0.0; break;
                    case ActivationKind::leaky_relu: slope = act.slope; break;
                    case ActivationKind::elu: slope = act.slope * std::exp(xv[i]); break;
                }
            }
            g[i] += slope * d[i];
        }
    });
}

Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b) {
    require(a.rows() == b.rows(),
            "concat_cols row mismatch: " + a.value().shape_string() + " vs " + b.value().shape_string());
    const std::size_t n = a.rows(), qa = a.cols(), qb = b.cols();
    Matrix c(n, qa + qb);
    for (std::size_t i = 0; i < n; ++i) {
        auto crow = c.row(i);
        std::copy_n(a.value().row(i).begin(), qa, crow.begin());
        std::copy_n(b.value().row(i).begin(), qb, crow.begin() + static_cast<std::ptrdiff_t>(qa));
    }
    return tape.record(std::move(c), {a, b}, [a, b](const Matrix& dc) {
        const std::size_t qa = a.cols();
        if (a.requires_grad()) {
            Matrix& ga = Tape::grad_buffer(a);
            for (std::size_t i = 0; i < ga.rows(); ++i)
                for (std::size_t j = 0; j < qa; ++j) ga(i, j) += dc(i, j);
        }
        if (b.requires_grad()) {
            Matrix& gb = Tape::grad_buffer(b);
            for (std::size_t i = 0; i < gb.rows(); ++i)
                for (std::size_t j = 0; j < gb.cols(); ++j) gb(i, j) += dc(i, qa + j);
        }
    });
}

Tensor slice_rows(Tape& tape, const Tensor& x, std::size_t begin, std::size_t end) {
    require(begin <= end && end <= x.rows(), "slice_rows range [" + std::to_string(begin) + ", " +
                                                 std::to_string(end) + ") outside " + x.value().shape_string());
    const std::size_t c = x.cols();
    const auto src = x.value().data().subspan(begin * c, (end - begin) * c);
    Matrix y(end - begin, c, std::vector<double>(src.begin(), src.end()));
    return tape.record(std::move(y), {x}, [x, begin](const Matrix& dy) {
        auto g = Tape::grad_buffer(x).data().subspan(begin * x.cols(), dy.size());
        const auto d = dy.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += d[i];
    });
}

Tensor row_merge(Tape& tape, const std::vector<bool>& mask, const Tensor& low, const Tensor& high) {
    require(low.value().same_shape(high.value()),
            "row_merge operand mismatch: " + low.value().shape_string() + " vs " + high.value().shape_string());
    require(mask.size() == low.rows(), "row_merge mask length " + std::to_string(mask.size()) +
                                           " does not match " + std::to_string(low.rows()) + " rows");
    Matrix out(low.rows(), low.cols());
    for (std::size_t k = 0; k < out.rows(); ++k) {
        const auto src = mask[k] ? low.value().row(k) : high.value().row(k);
        std::copy(src.begin(), src.end(), out.row(k).begin());
    }
    return tape.record(std::move(out), {low, high}, [mask, low, high](const Matrix& dy) {
        for (std::size_t k = 0; k < dy.rows(); ++k) {
            const Tensor& target = mask[k] ? low : high;
            if (!target.requires_grad()) continue;
            auto g = Tape::grad_buffer(target).row(k);
            const auto d = dy.row(k);
            for (std::size_t j = 0; j < g.size(); ++j) g[j] += d[j];
        }
    });
}

Tensor segment_softmax(Tape& tape, const Tensor& scores, std::span<const std::uint32_t> segment_ids,
                       std::size_t num_segments) {
    require(scores.cols() == 1 && scores.rows() == segment_ids.size(),
            "segment_softmax expects a column of " + std::to_string(segment_ids.size()) + " scores, got " +
                scores.value().shape_string());
    const std::size_t m = segment_ids.size();
    std::vector<double> seg_max(num_segments, -std::numeric_limits<double>::infinity());
    for (std::size_t e = 0; e < m; ++e) {
        require(segment_ids[e] < num_segments, "segment id out of range");
        seg_max[segment_ids[e]] = std::max(seg_max[segment_ids[e]], scores.at(e, 0));
    }
    Matrix y(m, 1);
    std::vector<double> seg_sum(num_segments, 0.0);
    for (std::size_t e = 0; e < m; ++e) {
        y(e, 0) = std::exp(scores.at(e, 0) - seg_max[segment_ids[e]]);
        seg_sum[segment_ids[e]] += y(e, 0);
    }
    for (std::size_t e = 0; e < m; ++e) y(e, 0) /= seg_sum[segment_ids[e]];
    Matrix saved = y;
    return tape.record(std::move(y), {scores},
                       [scores, ids = to_vector(segment_ids), num_segments, out = std::move(saved)](const Matrix& dy) {
                           std::vector<double> dot(num_segments, 0.0);
                           for (std::size_t e = 0; e < ids.size(); ++e) dot[ids[e]] += out(e, 0) * dy(e, 0);
                           Matrix& g = Tape::grad_buffer(scores);
                           for (std::size_t e = 0; e < ids.size(); ++e)
                               g(e, 0) += out(e, 0) * (dy(e, 0) - dot[ids[e]]);
                       });
}

Tensor edge_score_sum(Tape& tape, const Tensor& target_scores, const Tensor& source_scores,
                      std::span<const std::uint32_t> targets, std::span<const std::uint32_t> sources) {
    require(target_scores.cols() == 1 && source_scores.cols() == 1, "edge_score_sum expects column vectors");
    require(targets.size() == sources.size(), "edge_score_sum: target/source lists differ in length");
    Matrix out(targets.size(), 1);
    for (std::size_t e = 0; e < targets.size(); ++e) {
        require(targets[e] < target_scores.rows() && sources[e] < source_scores.rows(),
                "edge_score_sum: node id out of range");
        out(e, 0) = target_scores.at(targets[e], 0) + source_scores.at(sources[e], 0);
    }
    return tape.record(std::move(out), {target_scores, source_scores},
                       [target_scores, source_scores, targets, sources](const Matrix& dy) {
                           if (target_scores.requires_grad()) {
                               Matrix& g = Tape::grad_buffer(target_scores);
                               for (std::size_t e = 0; e < targets.size(); ++e) g(targets[e], 0) += dy(e, 0);
                           }
                           if (source_scores.requires_grad()) {
                               Matrix& g = Tape::grad_buffer(source_scores);
                               for (std::size_t e = 0; e < sources.size(); ++e) g(sources[e], 0) += dy(e, 0);
                           }
                       });
}

Tensor segment_weighted_sum(Tape& tape, const Tensor& weights, const Tensor& values,
                            std::span<const std::uint32_t> targets, std::span<const std::uint32_t> sources,
                            std::size_t num_targets) {
    require(weights.cols() == 1 && weights.rows() == targets.size() && targets.size() == sources.size(),
            "segment_weighted_sum: weights must be a column with one entry per edge");
    const std::size_t f = values.cols();
    Matrix out(num_targets, f);
    for (std::size_t e = 0; e < targets.size(); ++e) {
        require(targets[e] < num_targets && sources[e] < values.rows(), "segment_weighted_sum: node id out of range");
        const double w = weights.at(e, 0);
        auto orow = out.row(targets[e]);
        const auto vrow = values.value().row(sources[e]);
        for (std::size_t j = 0; j < f; ++j) orow[j] += w * vrow[j];
    }
    return tape.record(std::move(out), {weights, values}, [weights, values, targets, sources](const Matrix& dy) {
        const std::size_t f = values.cols();
        if (weights.requires_grad()) {
            Matrix& g = Tape::grad_buffer(weights);
            for (std::size_t e = 0; e < targets.size(); ++e) {
                const auto drow = dy.row(targets[e]);
                const auto vrow = values.value().row(sources[e]);
                double s = 0.0;
                for (std::size_t j = 0; j < f; ++j) s += drow[j] * vrow[j];
                g(e, 0) += s;
            }
        }
        if (values.requires_grad()) {
            Matrix& g = Tape::grad_buffer(values);
            for (std::size_t e = 0; e < targets.size(); ++e) {
                const double w = weights.at(e, 0);
                const auto drow = dy.row(targets[e]);
                auto grow = g.row(sources[e]);
                for (std::size_t j = 0; j < f; ++j) grow[j] += w * drow[j];
            }
        }
    });
}

Tensor cross_entropy_masked(Tape& tape, const Tensor& logits, std::span<const std::uint32_t> labels,
                            std::span<const std::uint32_t> mask) {
    if (mask.empty()) throw std::invalid_argument("empty evaluation mask");
    require(labels.size() == logits.rows(), "cross_entropy_masked: " + std::to_string(labels.size()) +
                                                " labels for " + std::to_string(logits.rows()) + " rows");
    const std::size_t classes = logits.cols();
    // Softmax probabilities of the masked rows are kept for the backward pass.
    Matrix probs(mask.size(), classes);
    double total = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const std::uint32_t v = mask[i];
        if (v >= logits.rows()) throw std::out_of_range("mask index " + std::to_string(v) + " out of range");
        if (labels[v] >= classes) {
            throw std::out_of_range("label " + std::to_string(labels[v]) + " of node " + std::to_string(v) +
                                    " outside [0, " + std::to_string(classes) + ")");
        }
        const auto row = logits.value().row(v);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double x : row) z += std::exp(x - mx);
        const double lse = mx + std::log(z);
        total += lse - row[labels[v]];
        auto prow = probs.row(i);
        for (std::size_t c = 0; c < classes; ++c) prow[c] = std::exp(row[c] - lse);
    }
    const double count = static_cast<double>(mask.size());
    return tape.record(Matrix(1, 1, total / count), {logits},
                       [logits, lab = to_vector(labels), msk = to_vector(mask), p = std::move(probs),
                        count](const Matrix& dy) {
                           Matrix& g = Tape::grad_buffer(logits);
                           const double scale = dy(0, 0) / count;
                           for (std::size_t i = 0; i < msk.size(); ++i) {
                               auto grow = g.row(msk[i]);
                               const auto prow = p.row(i);
                               for (std::size_t c = 0; c < grow.size(); ++c) {
                                   const double onehot = c == lab[msk[i]] ? 1.0 : 0.0;
                                   grow[c] += scale * (prow[c] - onehot);
                               }
                           }
                       });
}

}  // namespace gnnstrat
