/* tslint:disable */
/* eslint-disable */

export class Demo {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * A square with one bulging side mapped onto the unit square.
     */
    static arcSquare(n: number, amplitude: number): Demo;
    /**
     * Per-triangle condition number of the current map; `-1` marks inverted triangles.
     */
    conditions(): Float64Array;
    /**
     * A half-sphere with `rings` latitude rings, starting from its vertical projection.
     */
    static halfSphere(rings: number): Demo;
    /**
     * Current map as `x0, y0, x1, y1, ...`.
     */
    positions(): Float64Array;
    reset(): void;
    /**
     * Runs stiffening from the current (untangled) map and returns the summary line.
     */
    stiffen(theta: number): string;
    /**
     * An `n × n` grid with a `fraction` of interior vertices scattered, boundary held.
     */
    static tangledGrid(n: number, fraction: number, seed: number): Demo;
    /**
     * `d_min` per untangling iteration or `t` per stiffening iteration of the last run.
     */
    trace(): Float64Array;
    /**
     * Triangle corners as vertex indices, three per triangle.
     */
    triangles(): Uint32Array;
    /**
     * Runs the untangling continuation and returns the summary line.
     */
    untangle(theta: number): string;
    readonly t: number | undefined;
}

/**
 * Samples `gamma_bound` on `t ∈ (0, 1)`, returning `t0, Γ0, t1, Γ1, ...`.
 * Undefined points (θ at the ends of `[0, 1]` for the mixed density) are skipped.
 */
export function boundCurve(theta: number, symmetric_dirichlet: boolean, samples: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly boundCurve: (a: number, b: number, c: number) => [number, number];
    readonly demo_arcSquare: (a: number, b: number) => [number, number, number];
    readonly demo_conditions: (a: number) => [number, number];
    readonly demo_halfSphere: (a: number) => [number, number, number];
    readonly demo_positions: (a: number) => [number, number];
    readonly demo_reset: (a: number) => void;
    readonly demo_stiffen: (a: number, b: number) => [number, number, number, number];
    readonly demo_t: (a: number) => [number, number];
    readonly demo_tangledGrid: (a: number, b: number, c: number) => [number, number, number];
    readonly demo_trace: (a: number) => [number, number];
    readonly demo_triangles: (a: number) => [number, number];
    readonly demo_untangle: (a: number, b: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
