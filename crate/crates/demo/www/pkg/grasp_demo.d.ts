/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    candidates(): Float64Array;
    depthRgba(): Uint8Array;
    edges(): Uint32Array;
    height(): number;
    constructor();
    /**
     * Plans with the centroid heuristic; returns plan JSON including the 3-D label.
     */
    plan(seed: number): string;
    /**
     * Renders object `object` in a random stable pose and view; returns scene JSON.
     */
    render(object: number, seed: number): string;
    sampleGrasps(seed: number, min_friction: number): number;
    width(): number;
}

/**
 * Object names, one per line.
 */
export function objectNames(): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_candidates: (a: number) => [number, number];
    readonly demo_depthRgba: (a: number) => [number, number];
    readonly demo_edges: (a: number) => [number, number, number, number];
    readonly demo_height: (a: number) => number;
    readonly demo_new: () => number;
    readonly demo_plan: (a: number, b: number) => [number, number, number, number];
    readonly demo_render: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_sampleGrasps: (a: number, b: number, c: number) => [number, number, number];
    readonly demo_width: (a: number) => number;
    readonly objectNames: () => [number, number];
    readonly __externref_table_alloc: () => number;
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
