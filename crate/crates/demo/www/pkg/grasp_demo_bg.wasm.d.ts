/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_candidates: (a: number) => [number, number];
export const demo_depthRgba: (a: number) => [number, number];
export const demo_edges: (a: number) => [number, number, number, number];
export const demo_height: (a: number) => number;
export const demo_new: () => number;
export const demo_plan: (a: number, b: number) => [number, number, number, number];
export const demo_render: (a: number, b: number, c: number) => [number, number, number, number];
export const demo_sampleGrasps: (a: number, b: number, c: number) => [number, number, number];
export const demo_width: (a: number) => number;
export const objectNames: () => [number, number];
export const __externref_table_alloc: () => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
