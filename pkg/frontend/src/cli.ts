/**
 * Batch renderer: `node dist/cli.js <csv-dir> <out-dir>` discovers the
 * harness CSVs by their schema line, renders every figure kind it can, and
 * exits nonzero on any schema mismatch, missing column, or cross-fit
 * disagreement.  Nothing is written for inputs that fail validation.
 */

import { readdirSync, readFileSync, mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { CsvTable, parseCsv } from "./csv.js";
import { Figure, renderAcceptance, renderScaling, renderSlack } from "./figures.js";

export function loadTables(dir: string): Map<string, CsvTable> {
    const tables = new Map<string, CsvTable>();
    for (const entry of readdirSync(dir).sort()) {
        if (!entry.endsWith(".csv")) continue;
        const table = parseCsv(readFileSync(join(dir, entry), "utf-8"));
        tables.set(table.schema, table);
    }
    return tables;
}

export function renderAll(tables: Map<string, CsvTable>): Figure[] {
    const figures: Figure[] = [];
    const sweep = tables.get("qidlab.sweep.v1");
    const sweepFit = tables.get("qidlab.sweep_fit.v1");
    if (sweep && sweepFit) {
        figures.push(renderScaling(sweep, sweepFit));
    } else if (sweep || sweepFit) {
        throw new Error("scaling needs both qidlab.sweep.v1 and qidlab.sweep_fit.v1");
    }
    const summary = tables.get("qidlab.test_summary.v1");
    if (summary) figures.push(renderAcceptance(summary));
    const bounds = tables.get("qidlab.lowerbound.v1");
    if (bounds) figures.push(renderSlack(bounds));
    if (figures.length === 0) {
        throw new Error("no renderable CSV schemas found");
    }
    return figures;
}

export function main(argv: string[]): number {
    if (argv.length !== 2) {
        console.error("usage: cli.js <csv-dir> <out-dir>");
        return 2;
    }
    const [inDir, outDir] = argv;
    let figures: Figure[];
    try {
        figures = renderAll(loadTables(inDir));
    } catch (err) {
        console.error(`error: ${err instanceof Error ? err.message : err}`);
        return 1;
    }
    mkdirSync(outDir, { recursive: true });
    for (const fig of figures) {
        writeFileSync(join(outDir, fig.name), fig.svg, "utf-8");
        console.log(`wrote ${join(outDir, fig.name)}`);
    }
    return 0;
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
    process.exit(main(process.argv.slice(2)));
}
