/** Ordinary least squares on (x, y) pairs, matching the harness's slope and
 *  residual-based standard error so re-fits can be cross-checked exactly. */

export interface LineFit {
    slope: number;
    intercept: number;
    stderr: number;
    n: number;
}

export function leastSquares(xs: number[], ys: number[]): LineFit {
    const n = xs.length;
    if (n < 2 || ys.length !== n) {
        throw new Error(`need at least two paired points, got ${n}/${ys.length}`);
    }
    const mx = xs.reduce((a, b) => a + b, 0) / n;
    const my = ys.reduce((a, b) => a + b, 0) / n;
    let sxx = 0;
    let sxy = 0;
    for (let i = 0; i < n; i++) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    const slope = sxy / sxx;
    const intercept = my - slope * mx;
    let ssr = 0;
    for (let i = 0; i < n; i++) {
        const r = ys[i] - (intercept + slope * xs[i]);
        ssr += r * r;
    }
    const stderr = n > 2 ? Math.sqrt(ssr / (n - 2) / sxx) : 0;
    return { slope, intercept, stderr, n };
}

/** Wilson score interval; z matches the harness (95%). */
export function wilson(successes: number, trials: number, z = 1.959963984540054): [number, number] {
    if (trials === 0) return [0, 1];
    const phat = successes / trials;
    const denom = 1 + (z * z) / trials;
    const center = (phat + (z * z) / (2 * trials)) / denom;
    const half = (z * Math.sqrt((phat * (1 - phat)) / trials + (z * z) / (4 * trials * trials))) / denom;
    return [Math.max(0, center - half), Math.min(1, center + half)];
}
