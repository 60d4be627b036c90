"""Independent plain-Python references for the backtest. No imports from the package."""
import math
import statistics

# Four tickers, five trading days. Each price list starts with the close before
# the first test day. Day 1: signals +1, +1, -1, -1 against returns
# 0.01, 0.02, -0.03, 0.01, so the portfolio earns 0.0125.
FOUR_PRICES = {
    "A": [100.0, 101.0, 102.5, 101.8, 103.0, 102.2],
    "B": [50.0, 51.0, 50.4, 50.9, 51.5, 51.2],
    "C": [20.0, 19.4, 19.7, 19.5, 19.9, 20.3],
    "D": [10.0, 10.1, 10.0, 10.2, 10.15, 10.3],
}
FOUR_PREDS = {
    "A": [102.0, 101.0, 103.0, 101.0, 104.0],  # day 2 ties with 101.0 and carries +1
    "B": [52.0, 50.0, 51.0, 51.2, 51.0],
    "C": [19.0, 19.9, 19.6, 19.5, 20.5],  # day 4 ties with 19.5 and carries the previous signal
    "D": [9.0, 10.3, 9.9, 10.4, 10.0],
}

TOY_PRICES = {"X": [10.0, 10.5, 10.2, 10.8, 10.1], "Y": [20.0, 19.0, 19.5, 19.4, 20.2]}


def signals(prices, preds):
    out, last = [], None
    for prev, guess in zip(prices[:-1], preds):
        if guess > prev:
            s = 1
        elif guess < prev:
            s = -1
        else:
            s = last if last is not None else 1
        out.append(s)
        last = s
    return out


def block(daily, equity=None, total=None, periods=252, rf=0.0):
    """Every reported field for one return stream."""
    if equity is None:
        equity, v = [], 1.0
        for d in daily:
            v *= 1 + d
            equity.append(v)
    if total is None:
        total = equity[-1] - 1
    excess = [d - rf for d in daily]
    sharpe = None
    if len(excess) > 1 and statistics.stdev(excess) > 0:
        sharpe = statistics.mean(excess) / statistics.stdev(excess) * math.sqrt(periods)
    peak, mdd = 1.0, 0.0
    for v in [1.0] + list(equity):
        peak = max(peak, v)
        mdd = max(mdd, (peak - v) / peak)
    return {"daily": list(daily), "equity": list(equity), "total": total,
            "annualized": (1 + total) ** (periods / len(daily)) - 1, "sharpe": sharpe, "mdd": mdd}


def backtest(prices, preds):
    tickers = list(prices)
    n = len(tickers)
    T = len(prices[tickers[0]]) - 1
    sig = {t: signals(prices[t], preds[t]) for t in tickers}
    ret = {t: [prices[t][i + 1] / prices[t][i] - 1 for i in range(T)] for t in tickers}
    daily = [sum(sig[t][i] * ret[t][i] for t in tickers) / n for i in range(T)]
    out = {"signals": sig, "portfolio": block(daily)}
    out["per_ticker"] = {t: block([sig[t][i] * ret[t][i] for i in range(T)]) for t in tickers}
    bh = {}
    for t in tickers:
        p0 = prices[t][0]
        bh[t] = block(ret[t], [p / p0 for p in prices[t][1:]], (prices[t][-1] - p0) / p0)
    curve = [sum(prices[t][i + 1] / prices[t][0] for t in tickers) / n for i in range(T)]
    bh_daily = [curve[0] - 1] + [curve[i] / curve[i - 1] - 1 for i in range(1, T)]
    out["buy_and_hold"] = bh
    out["buy_and_hold_portfolio"] = block(bh_daily, curve, sum(bh[t]["total"] for t in tickers) / n)
    return out


def compare_block(actual, expected):
    """Max difference over every field of a PerformanceBlock versus an oracle block.

    Differences are absolute for values up to 1 and relative beyond that, since
    annualizing a short series raises rounding noise to a large power.
    """
    worst = 0.0
    pairs = [(actual.total_return, expected["total"]), (actual.annualized_return, expected["annualized"]),
             (actual.max_drawdown, expected["mdd"])]
    pairs += list(zip(actual.daily_returns, expected["daily"])) + list(zip(actual.equity_curve, expected["equity"]))
    if (actual.sharpe is None) != (expected["sharpe"] is None):
        return math.inf
    if actual.sharpe is not None:
        pairs.append((actual.sharpe, expected["sharpe"]))
    for a, e in pairs:
        worst = max(worst, abs(a - e) / max(1.0, abs(e)))
    return worst
