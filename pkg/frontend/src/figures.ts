/**
 * Figure builders for the three CSV families: scaling curves with re-fitted
 * slopes, acceptance-rate bars with Wilson intervals, and bound-slack panels.
 *
 * The renderer never trusts summary columns: slopes are re-fitted from the
 * raw cells and compared against the harness's fit file, and Wilson bounds
 * are recomputed from the raw counts; disagreement is a hard error.
 */

import { CsvTable, EmptyData, MissingColumns, num, requireColumns } from "./csv.js";
import { leastSquares, wilson } from "./fit.js";
import { makeScale, SvgCanvas, CANVAS } from "./svg.js";

export class CrossFitMismatch extends Error {}

export const SLOPE_TOL = 1e-6;
export const WILSON_TOL = 1e-9;

export interface Figure {
    name: string;
    svg: string;
}

interface RefitResult {
    fixed: string;
    slope: number;
    harnessSlope: number;
}

export function refitScaling(cells: CsvTable, fits: CsvTable): RefitResult[] {
    requireColumns(cells, ["d", "N", "mu_min"]);
    requireColumns(fits, ["axis", "fixed", "slope"]);
    if (cells.rows.length === 0) throw new EmptyData("scaling CSV has no rows");
    const byD = new Map<string, { x: number[]; y: number[] }>();
    for (const row of cells.rows) {
        const key = row["d"];
        const bucket = byD.get(key) ?? { x: [], y: [] };
        bucket.x.push(Math.log(num(row, "N")));
        bucket.y.push(Math.log(num(row, "mu_min")));
        byD.set(key, bucket);
    }
    const results: RefitResult[] = [];
    for (const [d, bucket] of byD) {
        if (bucket.x.length < 2) continue;
        const fit = leastSquares(bucket.x, bucket.y);
        const harness = fits.rows.find(r => r["axis"] === "N" && r["fixed"] === `d=${d}`);
        if (!harness) {
            throw new CrossFitMismatch(`no harness fit row for axis=N fixed=d=${d}`);
        }
        const harnessSlope = num(harness, "slope");
        if (Math.abs(fit.slope - harnessSlope) > SLOPE_TOL) {
            throw new CrossFitMismatch(
                `re-fitted slope ${fit.slope} differs from harness ${harnessSlope} for d=${d}`,
            );
        }
        results.push({ fixed: `d=${d}`, slope: fit.slope, harnessSlope });
    }
    if (results.length === 0) throw new EmptyData("no fittable groups in scaling CSV");
    return results;
}

export function renderScaling(cells: CsvTable, fits: CsvTable): Figure {
    const refits = refitScaling(cells, fits);
    const xs = cells.rows.map(r => Math.log(num(r, "N")));
    const ys = cells.rows.map(r => Math.log(num(r, "mu_min")));
    const scale = makeScale(Math.min(...xs), Math.max(...xs), Math.min(...ys), Math.max(...ys));
    const canvas = new SvgCanvas("minimal Poissonization mean vs collection size (log-log)");
    canvas.axisLabels("ln N", "ln mu_min");
    const colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let ci = 0;
    const byD = new Map<string, { x: number[]; y: number[] }>();
    for (const row of cells.rows) {
        const bucket = byD.get(row["d"]) ?? { x: [], y: [] };
        bucket.x.push(Math.log(num(row, "N")));
        bucket.y.push(Math.log(num(row, "mu_min")));
        byD.set(row["d"], bucket);
    }
    for (const [d, bucket] of byD) {
        const color = colors[ci % colors.length];
        const fit = leastSquares(bucket.x, bucket.y);
        for (let i = 0; i < bucket.x.length; i++) {
            canvas.circle(scale.toX(bucket.x[i]), scale.toY(bucket.y[i]), 4, color);
        }
        const x0 = Math.min(...bucket.x);
        const x1 = Math.max(...bucket.x);
        canvas.line(
            scale.toX(x0), scale.toY(fit.intercept + fit.slope * x0),
            scale.toX(x1), scale.toY(fit.intercept + fit.slope * x1),
            color,
        );
        canvas.text(
            CANVAS.W - 200, CANVAS.MARGIN.top + 16 * (ci + 1),
            `d=${d}: slope ${fit.slope.toFixed(4)} +- ${fit.stderr.toFixed(4)}`,
        );
        ci += 1;
    }
    return { name: "scaling.svg", svg: canvas.render() };
}

export function renderAcceptance(summary: CsvTable): Figure {
    requireColumns(summary, ["case", "accepts", "trials", "accept_rate", "wilson_lo", "wilson_hi"]);
    if (summary.rows.length === 0) throw new EmptyData("acceptance CSV has no rows");
    const canvas = new SvgCanvas("identity-test accept rates with Wilson 95% intervals");
    canvas.axisLabels("case", "accept rate");
    const scale = makeScale(0, summary.rows.length, 0, 1);
    summary.rows.forEach((row, i) => {
        const rate = num(row, "accept_rate");
        const [lo, hi] = wilson(num(row, "accepts"), num(row, "trials"));
        if (Math.abs(lo - num(row, "wilson_lo")) > WILSON_TOL || Math.abs(hi - num(row, "wilson_hi")) > WILSON_TOL) {
            throw new CrossFitMismatch(`Wilson interval mismatch for case ${row["case"]}`);
        }
        const x = scale.toX(i + 0.5);
        const barW = 28;
        canvas.rect(x - barW / 2, scale.toY(rate), barW, scale.toY(0) - scale.toY(rate), "#1f77b4");
        canvas.line(x, scale.toY(lo), x, scale.toY(hi), "black");
        canvas.line(x - 6, scale.toY(lo), x + 6, scale.toY(lo), "black");
        canvas.line(x - 6, scale.toY(hi), x + 6, scale.toY(hi), "black");
        canvas.text(x, scale.toY(0) + 14, row["case"], 10, "middle");
    });
    canvas.line(scale.toX(0), scale.toY(2 / 3), scale.toX(summary.rows.length), scale.toY(2 / 3), "#888", "4 3");
    canvas.line(scale.toX(0), scale.toY(1 / 3), scale.toX(summary.rows.length), scale.toY(1 / 3), "#888", "4 3");
    return { name: "acceptance.svg", svg: canvas.render() };
}

export function renderSlack(table: CsvTable): Figure {
    requireColumns(table, ["kind", "lhs", "rhs", "slack"]);
    if (table.rows.length === 0) throw new EmptyData("lower-bound CSV has no rows");
    const rows = table.rows.filter(r => r["kind"] === "tv" || r["kind"] === "chi2");
    if (rows.length === 0) throw new EmptyData("no bound rows to plot");
    const values = rows.flatMap(r => [num(r, "lhs"), num(r, "rhs")]);
    const scale = makeScale(0, rows.length, Math.min(...values), Math.max(...values));
    const canvas = new SvgCanvas("bound ledgers: checked value vs stated bound");
    canvas.axisLabels("ledger row", "value");
    rows.forEach((row, i) => {
        const x = scale.toX(i + 0.5);
        canvas.circle(x, scale.toY(num(row, "lhs")), 3, "#1f77b4");
        canvas.circle(x, scale.toY(num(row, "rhs")), 3, "#d62728");
        if (num(row, "slack") < 0) {
            canvas.text(x, CANVAS.MARGIN.top + 12, "violation", 10, "middle");
        }
    });
    canvas.text(CANVAS.W - 200, CANVAS.MARGIN.top + 16, "blue: checked value");
    canvas.text(CANVAS.W - 200, CANVAS.MARGIN.top + 32, "red: stated bound");
    return { name: "slack.svg", svg: canvas.render() };
}
