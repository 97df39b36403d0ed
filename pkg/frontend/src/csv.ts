/**
 * Strict reader for the harness CSV dialect: one comment line
 * `# schema=<id> config=<hash> version=<v>`, a header row, and plain
 * comma-separated values (the writer never quotes or embeds commas).
 */

export interface CsvTable {
    schema: string;
    configHash: string;
    version: string;
    columns: string[];
    rows: Record<string, string>[];
}

export class SchemaMismatch extends Error {}
export class MissingColumns extends Error {}
export class EmptyData extends Error {}

export function parseCsv(text: string): CsvTable {
    const lines = text.split("\n").filter(line => line.length > 0);
    if (lines.length < 2 || !lines[0].startsWith("# ")) {
        throw new SchemaMismatch("missing schema comment line");
    }
    const meta = new Map<string, string>();
    for (const part of lines[0].slice(2).split(" ")) {
        const eq = part.indexOf("=");
        if (eq > 0) meta.set(part.slice(0, eq), part.slice(eq + 1));
    }
    const schema = meta.get("schema");
    if (!schema || !schema.startsWith("qidlab.")) {
        throw new SchemaMismatch(`unrecognized schema ${schema ?? "<none>"}`);
    }
    const columns = lines[1].split(",");
    const rows: Record<string, string>[] = [];
    for (const line of lines.slice(2)) {
        if (line.includes('"')) {
            throw new SchemaMismatch("quoted fields are not part of the dialect");
        }
        const cells = line.split(",");
        if (cells.length !== columns.length) {
            throw new SchemaMismatch(`row with ${cells.length} cells, expected ${columns.length}`);
        }
        const row: Record<string, string> = {};
        columns.forEach((col, i) => (row[col] = cells[i]));
        rows.push(row);
    }
    return {
        schema,
        configHash: meta.get("config") ?? "",
        version: meta.get("version") ?? "",
        columns,
        rows,
    };
}

export function requireColumns(table: CsvTable, needed: string[]): void {
    const missing = needed.filter(c => !table.columns.includes(c));
    if (missing.length > 0) {
        throw new MissingColumns(`${table.schema} is missing columns: ${missing.join(", ")}`);
    }
}

export function num(row: Record<string, string>, col: string): number {
    const v = Number(row[col]);
    if (Number.isNaN(v) && row[col] !== "nan") {
        throw new SchemaMismatch(`non-numeric value '${row[col]}' in column ${col}`);
    }
    return v;
}
