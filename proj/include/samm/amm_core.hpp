#pragma once

// Constant-product pool primitives: swap pricing, share accounting, and
// arbitrage rebalancing. Everything is a pure function over value-semantic
// state; callers own all mutation, so any thread may call anything.

#include <cmath>
#include <stdexcept>
#include <utility>

namespace samm {

using Real = double;

// Relative tolerance for the constant-product legality check and for the
// balance identities built on top of it.
inline constexpr Real rel_tol = 1e-9;

// External-market unit values of the two tokens.
struct MarketPrices {
    Real price_a = 1.0;
    Real price_b = 1.0;
};

// One pool: token reserves plus the share tokens held by its providers.
// Shares circulate outside the pool; they are not a reserve.
struct ShardState {
    Real reserve_a = 0.0;
    Real reserve_b = 0.0;
    Real shares_outstanding = 0.0;
};

// A settled swap. Exactly one direction is populated: token A leaves the
// pool against a net token-B payment, or the mirror image. Inputs are the
// net amounts credited to reserves; fees never touch reserves.
struct Trade {
    Real input_a = 0.0;
    Real output_a = 0.0;
    Real input_b = 0.0;
    Real output_b = 0.0;
};

namespace detail {

inline void require_active(const ShardState& s) {
    if (!(s.reserve_a > 0.0) || !(s.reserve_b > 0.0))
        throw std::domain_error("pool has no liquidity");
}

inline void require_prices(const MarketPrices& p) {
    if (!(p.price_a > 0.0) || !(p.price_b > 0.0))
        throw std::invalid_argument("prices must be strictly positive");
}

}  // namespace detail

// Marginal exchange rate quoted by the pool (token B per token A).
inline Real reported_price(const ShardState& s) {
    detail::require_active(s);
    return s.reserve_b / s.reserve_a;
}

// Net cost in token B of withdrawing output_a tokens A: the unique payment
// that keeps reserve_a * reserve_b constant. Strictly increasing and
// strictly convex in output_a.
inline Real net_amount(const ShardState& s, Real output_a) {
    detail::require_active(s);
    if (output_a < 0.0)
        throw std::domain_error("negative output amount");
    if (output_a >= s.reserve_a)
        throw std::domain_error("output amount would drain the pool");
    return s.reserve_b * output_a / (s.reserve_a - output_a);
}

// Total payment under a multiplicative fee: net / gamma, where 1 - gamma is
// the fee ratio (e.g. gamma = 0.997 for a 0.3% fee).
inline Real cpmm_gross(const ShardState& s, Real output_a, Real gamma) {
    if (!(gamma > 0.0) || gamma > 1.0)
        throw std::invalid_argument("gamma must lie in (0, 1]");
    return net_amount(s, output_a) / gamma;
}

// Shares minted for a two-sided deposit: proportional to the lesser of the
// two deposit/reserve ratios. The caller applies the deposit and the mint.
inline Real mint_shares(const ShardState& s, Real input_a, Real input_b) {
    detail::require_active(s);
    if (input_a < 0.0 || input_b < 0.0)
        throw std::invalid_argument("negative deposit");
    return s.shares_outstanding *
           std::min(input_a / s.reserve_a, input_b / s.reserve_b);
}

// Reserves returned for burning input_shares: the proportional slice of
// both reserves.
inline std::pair<Real, Real> burn_shares(const ShardState& s, Real input_shares) {
    detail::require_active(s);
    if (input_shares < 0.0)
        throw std::invalid_argument("negative share amount");
    if (input_shares > s.shares_outstanding)
        throw std::domain_error("burn exceeds outstanding shares");
    const Real f = input_shares / s.shares_outstanding;
    return {f * s.reserve_a, f * s.reserve_b};
}

// Reserve mix an arbitrageur leaves behind: same product, reported price
// equal to the external price ratio. Shares are untouched.
inline ShardState arbitrage_rebalance(const ShardState& s, const MarketPrices& p) {
    detail::require_active(s);
    detail::require_prices(p);
    const Real k = s.reserve_a * s.reserve_b;
    ShardState out = s;
    out.reserve_a = std::sqrt(k * p.price_b / p.price_a);
    out.reserve_b = std::sqrt(k * p.price_a / p.price_b);
    return out;
}

// Applies a settled trade to the reserves and enforces the constant-product
// invariant to relative tolerance. The all-zero trade is the identity.
inline ShardState apply_trade(const ShardState& s, const Trade& t) {
    detail::require_active(s);
    if (t.input_a < 0.0 || t.output_a < 0.0 || t.input_b < 0.0 || t.output_b < 0.0)
        throw std::domain_error("negative trade leg");
    const bool buys_a = t.output_a > 0.0 || t.input_b > 0.0;
    const bool buys_b = t.output_b > 0.0 || t.input_a > 0.0;
    if (buys_a && buys_b)
        throw std::domain_error("trade must have exactly one direction");
    if (!buys_a && !buys_b)
        return s;

    ShardState out = s;
    if (buys_a) {
        if (t.output_a >= s.reserve_a)
            throw std::domain_error("output amount would drain the pool");
        out.reserve_a -= t.output_a;
        out.reserve_b += t.input_b;
    } else {
        if (t.output_b >= s.reserve_b)
            throw std::domain_error("output amount would drain the pool");
        out.reserve_b -= t.output_b;
        out.reserve_a += t.input_a;
    }
    const Real k0 = s.reserve_a * s.reserve_b;
    const Real k1 = out.reserve_a * out.reserve_b;
    if (std::abs(k1 - k0) > rel_tol * k0)
        throw std::domain_error("trade violates the constant product");
    return out;
}

}  // namespace samm
