#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "recipro/errors.hpp"
#include "recipro/linalg.hpp"

namespace recipro {

class WeightSchedule;

/// One constant-rate span [t_begin, t_end). `rates(i, j)` is the weight with
/// which agent j attracts agent i over the span; the diagonal is kept at zero.
struct SchedulePiece {
    double t_begin = 0.0;
    double t_end = 0.0;
    Mat rates;

    bool operator==(const SchedulePiece&) const = default;
};

/// Declared long-run behaviour of a directed weight a_ij.
enum class EdgeHint {
    unknown,
    persistent, ///< cumulative integral of a_ij diverges
    transient,  ///< cumulative integral of a_ij stays finite
};

/// Closed-form scenario families. `materialize` bakes any finite horizon into
/// a WeightSchedule whose pieces reproduce the scenario tables.
class ScheduleGenerator {
  public:
    enum class Kind { example1, example2, oscillator, custom };

    /// Two weakly coupled 2-agent subsystems (rates 1/p^2 between them) whose
    /// members alternately attract each other with rates 1/p. Interactions
    /// start at t = 2; cycle p covers [2p, 2p+2).
    static ScheduleGenerator example1() { return ScheduleGenerator(Kind::example1, 4); }

    /// Chain of 4 agents attracted up the chain on [2p, 2p+1) and down on
    /// [2p+1, 2p+2), with rates 1/p^2, 1/p, 1 along the chain.
    static ScheduleGenerator example2() { return ScheduleGenerator(Kind::example2, 4); }

    /// Three agents where the middle one is alternately attracted by the two
    /// extremes, one direction per unit phase, with rate rho_p over cycle
    /// [4p, 4p+4). Default rho_p = p + 3 keeps prod(1 - e^-rho_p) >= 0.9 so
    /// the extremes stay separated.
    static ScheduleGenerator oscillator(double rho_slope = 1.0, double rho_offset = 3.0) {
        ScheduleGenerator g(Kind::oscillator, 3);
        g.rho_slope_ = rho_slope;
        g.rho_offset_ = rho_offset;
        return g;
    }

    /// Explicit piece table; materialization crops to the horizon, fills gaps
    /// between listed pieces with zero rates and pads the tail likewise.
    static ScheduleGenerator custom(int n, std::vector<SchedulePiece> pieces,
                                    std::vector<EdgeHint> hints = {}) {
        ScheduleGenerator g(Kind::custom, n);
        g.custom_pieces_ = std::move(pieces);
        g.custom_hints_ = std::move(hints);
        return g;
    }

    Kind kind() const { return kind_; }
    int agent_count() const { return n_; }
    double rho(int p) const { return rho_slope_ * p + rho_offset_; }
    double rho_slope() const { return rho_slope_; }
    double rho_offset() const { return rho_offset_; }

    Mat rate_at(double t) const;
    WeightSchedule materialize(double horizon) const;

  private:
    ScheduleGenerator(Kind kind, int n) : kind_(kind), n_(n) {}

    Kind kind_;
    int n_;
    double rho_slope_ = 1.0;
    double rho_offset_ = 3.0;
    std::vector<SchedulePiece> custom_pieces_;
    std::vector<EdgeHint> custom_hints_;
};

/// Piecewise-constant weight function t -> A(t) for a group of n agents.
///
/// Pieces are contiguous half-open intervals starting at t = 0, so evaluation
/// at any covered time resolves to exactly one matrix. Instances are immutable
/// after construction and safe to share across threads.
class WeightSchedule {
  public:
    WeightSchedule(int n, std::vector<SchedulePiece> pieces,
                   std::vector<EdgeHint> hints = {},
                   std::optional<ScheduleGenerator> generator = std::nullopt);

    int agent_count() const { return n_; }
    double horizon() const { return pieces_.back().t_end; }
    const std::vector<SchedulePiece>& pieces() const { return pieces_; }

    /// Rate matrix at time t in [0, horizon). Throws OutOfRangeError beyond
    /// the horizon unless a generator was attached (then the generator's
    /// closed form answers).
    Mat rate_at(double t) const;

    /// Exact integral of a_ij over [t0, t1] (sum of rate * overlap, pieces in
    /// ascending order). Requires 0 <= t0 <= t1 <= horizon.
    double integral_weight(int i, int j, double t0, double t1) const;

    /// All directed integrals over [t0, t1] at once.
    Mat integral_matrix(double t0, double t1) const;

    /// Same integral but with [t0, t1] clipped to the covered range; mass
    /// outside [0, horizon] counts as zero. Used by window searches whose
    /// candidate windows may poke past the data.
    double integral_weight_clipped(int i, int j, double t0, double t1) const;

    /// True when a_ij vanishes identically on [t0, t1] (exact on the piece
    /// table). The portion outside [0, horizon] counts as zero.
    bool zero_on(int i, int j, double t0, double t1) const;

    /// Declared persistence of the directed weight a_ij.
    EdgeHint hint(int i, int j) const { return hints_[static_cast<std::size_t>(i) * n_ + j]; }
    bool has_hints() const;
    WeightSchedule with_hints_cleared() const;

    const std::vector<EdgeHint>& hints() const { return hints_; }
    const std::optional<ScheduleGenerator>& generator() const { return generator_; }

    /// Breakpoints strictly inside (t0, t1).
    std::vector<double> breakpoints_in(double t0, double t1) const;

    /// All piece boundaries (t = 0, every interior breakpoint, horizon).
    std::vector<double> breakpoints() const;

    bool operator==(const WeightSchedule& other) const {
        return n_ == other.n_ && pieces_ == other.pieces_ && hints_ == other.hints_;
    }

  private:
    std::size_t piece_index(double t) const;
    void require_range(double t0, double t1) const;

    int n_ = 0;
    std::vector<SchedulePiece> pieces_;
    std::vector<EdgeHint> hints_;
    std::optional<ScheduleGenerator> generator_;
};

// ---------------------------------------------------------------------------

inline WeightSchedule::WeightSchedule(int n, std::vector<SchedulePiece> pieces,
                                      std::vector<EdgeHint> hints,
                                      std::optional<ScheduleGenerator> generator)
    : n_(n), pieces_(std::move(pieces)), hints_(std::move(hints)), generator_(std::move(generator)) {
    if (n_ < 2) throw InvalidScheduleError("schedule needs at least 2 agents");
    if (pieces_.empty()) throw InvalidScheduleError("schedule needs at least one piece");
    if (pieces_.front().t_begin != 0.0)
        throw InvalidScheduleError("schedule must cover from t = 0 (prepend a zero piece)");
    double prev_end = 0.0;
    for (auto& piece : pieces_) {
        if (piece.t_begin != prev_end)
            throw InvalidScheduleError("pieces must be contiguous and non-overlapping");
        if (!(piece.t_end > piece.t_begin))
            throw InvalidScheduleError("piece must have positive length");
        if (piece.rates.rows() != n_ || piece.rates.cols() != n_)
            throw InvalidScheduleError("piece rate matrix has wrong shape");
        for (int i = 0; i < n_; ++i) {
            piece.rates(i, i) = 0.0; // self-weight has no effect; stored as zero
            for (int j = 0; j < n_; ++j) {
                const double r = piece.rates(i, j);
                if (!std::isfinite(r) || r < 0.0)
                    throw InvalidScheduleError("rates must be finite and non-negative");
            }
        }
        prev_end = piece.t_end;
    }
    if (hints_.empty()) hints_.assign(static_cast<std::size_t>(n_) * n_, EdgeHint::unknown);
    if (hints_.size() != static_cast<std::size_t>(n_) * n_)
        throw InvalidScheduleError("persistence hint table has wrong size");
}

inline std::size_t WeightSchedule::piece_index(double t) const {
    // First piece with t_end > t.
    std::size_t lo = 0, hi = pieces_.size();
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (pieces_[mid].t_end <= t)
            lo = mid + 1;
        else
            hi = mid;
    }
    return lo;
}

inline Mat WeightSchedule::rate_at(double t) const {
    if (t < 0.0) throw OutOfRangeError("rate_at: negative time");
    if (t >= horizon()) {
        if (generator_) return generator_->rate_at(t);
        throw OutOfRangeError("rate_at: time beyond horizon and no generator attached");
    }
    return pieces_[piece_index(t)].rates;
}

inline void WeightSchedule::require_range(double t0, double t1) const {
    if (!(t0 <= t1)) throw OutOfRangeError("integral: t0 must be <= t1");
    if (t0 < 0.0 || t1 > horizon()) throw OutOfRangeError("integral: interval outside covered range");
}

inline double WeightSchedule::integral_weight(int i, int j, double t0, double t1) const {
    require_range(t0, t1);
    return integral_weight_clipped(i, j, t0, t1);
}

inline double WeightSchedule::integral_weight_clipped(int i, int j, double t0, double t1) const {
    t0 = std::max(t0, 0.0);
    t1 = std::min(t1, horizon());
    if (!(t0 < t1)) return 0.0;
    double total = 0.0;
    for (std::size_t k = piece_index(t0); k < pieces_.size() && pieces_[k].t_begin < t1; ++k) {
        const auto& piece = pieces_[k];
        const double overlap = std::min(t1, piece.t_end) - std::max(t0, piece.t_begin);
        if (overlap > 0.0) total += piece.rates(i, j) * overlap;
    }
    return total;
}

inline Mat WeightSchedule::integral_matrix(double t0, double t1) const {
    require_range(t0, t1);
    Mat w(n_, n_);
    for (std::size_t k = piece_index(t0); k < pieces_.size() && pieces_[k].t_begin < t1; ++k) {
        const auto& piece = pieces_[k];
        const double overlap = std::min(t1, piece.t_end) - std::max(t0, piece.t_begin);
        if (overlap <= 0.0) continue;
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) w(i, j) += piece.rates(i, j) * overlap;
    }
    return w;
}

inline bool WeightSchedule::zero_on(int i, int j, double t0, double t1) const {
    t0 = std::max(t0, 0.0);
    t1 = std::min(t1, horizon());
    if (!(t0 < t1)) return true;
    for (std::size_t k = piece_index(t0); k < pieces_.size() && pieces_[k].t_begin < t1; ++k) {
        if (std::min(t1, pieces_[k].t_end) - std::max(t0, pieces_[k].t_begin) <= 0.0) continue;
        if (pieces_[k].rates(i, j) != 0.0) return false;
    }
    return true;
}

inline bool WeightSchedule::has_hints() const {
    return std::any_of(hints_.begin(), hints_.end(),
                       [](EdgeHint h) { return h != EdgeHint::unknown; });
}

inline WeightSchedule WeightSchedule::with_hints_cleared() const {
    return WeightSchedule(n_, pieces_, {}, generator_);
}

inline std::vector<double> WeightSchedule::breakpoints_in(double t0, double t1) const {
    std::vector<double> out;
    for (const auto& piece : pieces_) {
        if (piece.t_begin > t0 && piece.t_begin < t1) out.push_back(piece.t_begin);
        if (piece.t_begin >= t1) break;
    }
    return out;
}

inline std::vector<double> WeightSchedule::breakpoints() const {
    std::vector<double> out;
    out.reserve(pieces_.size() + 1);
    for (const auto& piece : pieces_) out.push_back(piece.t_begin);
    out.push_back(pieces_.back().t_end);
    return out;
}

// ---------------------------------------------------------------------------

namespace detail {

inline void crop_and_append(std::vector<SchedulePiece>& pieces, SchedulePiece piece, double horizon) {
    if (piece.t_begin >= horizon) return;
    piece.t_end = std::min(piece.t_end, horizon);
    if (piece.t_end > piece.t_begin) pieces.push_back(std::move(piece));
}

} // namespace detail

inline Mat ScheduleGenerator::rate_at(double t) const {
    Mat a(n_, n_);
    if (t < 0.0) return a;
    switch (kind_) {
    case Kind::example1: {
        if (t < 2.0) return a;
        const int p = static_cast<int>(std::floor(t / 2.0));
        const double weak = 1.0 / (static_cast<double>(p) * p);
        const double strong = 1.0 / p;
        a(0, 1) = a(1, 0) = a(2, 3) = a(3, 2) = weak;
        if (t < 2.0 * p + 1.0) {
            a(2, 1) = strong; // a_32
            a(3, 0) = strong; // a_41
        } else {
            a(1, 2) = strong; // a_23
            a(0, 3) = strong; // a_14
        }
        return a;
    }
    case Kind::example2: {
        if (t < 2.0) return a;
        const int p = static_cast<int>(std::floor(t / 2.0));
        const double w1 = 1.0 / (static_cast<double>(p) * p);
        const double w2 = 1.0 / p;
        if (t < 2.0 * p + 1.0) {
            a(0, 1) = w1;  // a_12
            a(1, 2) = w2;  // a_23
            a(2, 3) = 1.0; // a_34
        } else {
            a(1, 0) = w1;  // a_21
            a(2, 1) = w2;  // a_32
            a(3, 2) = 1.0; // a_43
        }
        return a;
    }
    case Kind::oscillator: {
        const int p = static_cast<int>(std::floor(t / 4.0));
        const double r = rho(p);
        const int phase = static_cast<int>(std::floor(t - 4.0 * p));
        if (phase == 0)
            a(1, 0) = r; // a_21
        else if (phase == 1)
            a(0, 1) = r; // a_12
        else if (phase == 2)
            a(1, 2) = r; // a_23
        else
            a(2, 1) = r; // a_32
        return a;
    }
    case Kind::custom: {
        for (const auto& piece : custom_pieces_)
            if (t >= piece.t_begin && t < piece.t_end) return piece.rates;
        return a;
    }
    }
    return a;
}

inline WeightSchedule ScheduleGenerator::materialize(double horizon) const {
    if (!(horizon > 0.0)) throw InvalidScheduleError("materialize: horizon must be positive");
    std::vector<SchedulePiece> pieces;
    std::vector<EdgeHint> hints;

    auto set_hint = [&](int i, int j, EdgeHint h) {
        hints[static_cast<std::size_t>(i) * n_ + j] = h;
    };

    switch (kind_) {
    case Kind::example1: {
        hints.assign(16, EdgeHint::unknown);
        detail::crop_and_append(pieces, {0.0, 2.0, Mat(4, 4)}, horizon);
        for (int p = 1; 2.0 * p < horizon; ++p) {
            const double t = 2.0 * p;
            detail::crop_and_append(pieces, {t, t + 1.0, rate_at(t)}, horizon);
            detail::crop_and_append(pieces, {t + 1.0, t + 2.0, rate_at(t + 1.0)}, horizon);
        }
        // 1/p weights accumulate without bound, 1/p^2 weights do not.
        set_hint(2, 1, EdgeHint::persistent); // a_32
        set_hint(1, 2, EdgeHint::persistent); // a_23
        set_hint(3, 0, EdgeHint::persistent); // a_41
        set_hint(0, 3, EdgeHint::persistent); // a_14
        set_hint(0, 1, EdgeHint::transient);
        set_hint(1, 0, EdgeHint::transient);
        set_hint(2, 3, EdgeHint::transient);
        set_hint(3, 2, EdgeHint::transient);
        break;
    }
    case Kind::example2: {
        hints.assign(16, EdgeHint::unknown);
        detail::crop_and_append(pieces, {0.0, 2.0, Mat(4, 4)}, horizon);
        for (int p = 1; 2.0 * p < horizon; ++p) {
            const double t = 2.0 * p;
            detail::crop_and_append(pieces, {t, t + 1.0, rate_at(t)}, horizon);
            detail::crop_and_append(pieces, {t + 1.0, t + 2.0, rate_at(t + 1.0)}, horizon);
        }
        set_hint(1, 2, EdgeHint::persistent); // a_23
        set_hint(2, 1, EdgeHint::persistent); // a_32
        set_hint(2, 3, EdgeHint::persistent); // a_34
        set_hint(3, 2, EdgeHint::persistent); // a_43
        set_hint(0, 1, EdgeHint::transient);  // a_12
        set_hint(1, 0, EdgeHint::transient);  // a_21
        break;
    }
    case Kind::oscillator: {
        hints.assign(9, EdgeHint::unknown);
        for (int p = 0; 4.0 * p < horizon; ++p) {
            const double t = 4.0 * p;
            for (int phase = 0; phase < 4; ++phase)
                detail::crop_and_append(pieces, {t + phase, t + phase + 1.0, rate_at(t + phase)},
                                        horizon);
        }
        break;
    }
    case Kind::custom: {
        hints = custom_hints_;
        double cursor = 0.0;
        for (const auto& piece : custom_pieces_) {
            if (piece.t_begin >= horizon) break;
            if (piece.t_begin > cursor)
                detail::crop_and_append(pieces, {cursor, piece.t_begin, Mat(n_, n_)}, horizon);
            detail::crop_and_append(pieces, piece, horizon);
            cursor = std::min(piece.t_end, horizon);
        }
        if (cursor < horizon)
            detail::crop_and_append(pieces, {cursor, horizon, Mat(n_, n_)}, horizon);
        break;
    }
    }
    if (pieces.empty() || pieces.back().t_end < horizon) {
        const double from = pieces.empty() ? 0.0 : pieces.back().t_end;
        pieces.push_back({from, horizon, Mat(n_, n_)});
    }
    return WeightSchedule(n_, std::move(pieces), std::move(hints), *this);
}

} // namespace recipro
