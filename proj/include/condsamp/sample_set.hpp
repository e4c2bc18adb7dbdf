#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>

#include "condsamp/errors.hpp"

namespace condsamp {

/// A set of states (one per row) with an optional scalar label per point and
/// per-point weights. The universal dataset carrier between modules.
struct SampleSet {
    Eigen::MatrixXd points;                 // N x dim
    std::optional<Eigen::VectorXd> labels;  // N, if present
    Eigen::VectorXd weights;                // N, defaults to ones

    SampleSet() = default;
    explicit SampleSet(Eigen::MatrixXd pts) : points(std::move(pts)) {
        weights = Eigen::VectorXd::Ones(points.rows());
    }
    SampleSet(Eigen::MatrixXd pts, Eigen::VectorXd labs)
        : points(std::move(pts)), labels(std::move(labs)) {
        if (labels->size() != points.rows())
            throw DimensionError("SampleSet: label count != point count");
        weights = Eigen::VectorXd::Ones(points.rows());
    }

    Eigen::Index size() const { return points.rows(); }
    Eigen::Index dim() const { return points.cols(); }

    /// Keep every stride-th row starting at `offset`.
    SampleSet thin(Eigen::Index stride, Eigen::Index offset = 0) const {
        if (stride < 1) throw Error("SampleSet::thin: stride must be >= 1");
        const Eigen::Index n = (size() - offset + stride - 1) / stride;
        SampleSet out;
        out.points.resize(n, dim());
        out.weights.resize(n);
        if (labels) out.labels = Eigen::VectorXd(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index src = offset + i * stride;
            out.points.row(i) = points.row(src);
            out.weights(i) = weights(src);
            if (labels) (*out.labels)(i) = (*labels)(src);
        }
        return out;
    }

    /// Rows [lo, hi).
    SampleSet slice(Eigen::Index lo, Eigen::Index hi) const {
        SampleSet out;
        out.points = points.middleRows(lo, hi - lo);
        out.weights = weights.segment(lo, hi - lo);
        if (labels) out.labels = labels->segment(lo, hi - lo);
        return out;
    }

    static SampleSet concat(const std::vector<SampleSet>& parts) {
        Eigen::Index n = 0;
        for (const auto& p : parts) n += p.size();
        if (parts.empty()) throw Error("SampleSet::concat: no inputs");
        const Eigen::Index d = parts.front().dim();
        const bool with_labels = parts.front().labels.has_value();
        SampleSet out;
        out.points.resize(n, d);
        out.weights.resize(n);
        if (with_labels) out.labels = Eigen::VectorXd(n);
        Eigen::Index at = 0;
        for (const auto& p : parts) {
            if (p.dim() != d) throw DimensionError("SampleSet::concat: dim mismatch");
            if (p.labels.has_value() != with_labels)
                throw Error("SampleSet::concat: inconsistent labels");
            out.points.middleRows(at, p.size()) = p.points;
            out.weights.segment(at, p.size()) = p.weights;
            if (with_labels) out.labels->segment(at, p.size()) = *p.labels;
            at += p.size();
        }
        return out;
    }
};

}  // namespace condsamp
