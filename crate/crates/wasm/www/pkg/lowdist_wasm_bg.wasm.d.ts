/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const boundCurve: (a: number, b: number, c: number) => [number, number];
export const demo_arcSquare: (a: number, b: number) => [number, number, number];
export const demo_conditions: (a: number) => [number, number];
export const demo_halfSphere: (a: number) => [number, number, number];
export const demo_positions: (a: number) => [number, number];
export const demo_reset: (a: number) => void;
export const demo_stiffen: (a: number, b: number) => [number, number, number, number];
export const demo_t: (a: number) => [number, number];
export const demo_tangledGrid: (a: number, b: number, c: number) => [number, number, number];
export const demo_trace: (a: number) => [number, number];
export const demo_triangles: (a: number) => [number, number];
export const demo_untangle: (a: number, b: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
