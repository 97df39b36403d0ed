/** Minimal deterministic SVG output: fixed canvas, fixed precision, no
 *  randomness, no font metrics (labels are plain <text> left to the viewer). */

const W = 640;
const H = 420;
const MARGIN = { left: 64, right: 24, top: 36, bottom: 48 };

export interface Scale {
    toX(v: number): number;
    toY(v: number): number;
}

function fmt(v: number): string {
    return Number(v.toPrecision(6)).toString();
}

export function makeScale(xmin: number, xmax: number, ymin: number, ymax: number): Scale {
    const spanX = xmax - xmin || 1;
    const spanY = ymax - ymin || 1;
    return {
        toX: v => MARGIN.left + ((v - xmin) / spanX) * (W - MARGIN.left - MARGIN.right),
        toY: v => H - MARGIN.bottom - ((v - ymin) / spanY) * (H - MARGIN.top - MARGIN.bottom),
    };
}

export class SvgCanvas {
    private parts: string[] = [];

    constructor(title: string) {
        this.parts.push(
            `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}">`,
            `<rect width="${W}" height="${H}" fill="white"/>`,
            `<text x="${W / 2}" y="20" text-anchor="middle" font-size="14">${title}</text>`,
            `<line x1="${MARGIN.left}" y1="${H - MARGIN.bottom}" x2="${W - MARGIN.right}" y2="${H - MARGIN.bottom}" stroke="black"/>`,
            `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" y2="${H - MARGIN.bottom}" stroke="black"/>`,
        );
    }

    circle(x: number, y: number, r: number, fill: string): void {
        this.parts.push(`<circle cx="${fmt(x)}" cy="${fmt(y)}" r="${r}" fill="${fill}"/>`);
    }

    line(x1: number, y1: number, x2: number, y2: number, stroke: string, dash = ""): void {
        const d = dash ? ` stroke-dasharray="${dash}"` : "";
        this.parts.push(
            `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" stroke="${stroke}"${d}/>`,
        );
    }

    rect(x: number, y: number, w: number, h: number, fill: string): void {
        this.parts.push(`<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" fill="${fill}"/>`);
    }

    text(x: number, y: number, content: string, size = 11, anchor = "start"): void {
        this.parts.push(
            `<text x="${fmt(x)}" y="${fmt(y)}" text-anchor="${anchor}" font-size="${size}">${content}</text>`,
        );
    }

    axisLabels(xlabel: string, ylabel: string): void {
        this.text(W / 2, H - 12, xlabel, 12, "middle");
        this.parts.push(
            `<text x="16" y="${H / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 16 ${H / 2})">${ylabel}</text>`,
        );
    }

    render(): string {
        return this.parts.join("\n") + "\n</svg>\n";
    }
}

export const CANVAS = { W, H, MARGIN };
