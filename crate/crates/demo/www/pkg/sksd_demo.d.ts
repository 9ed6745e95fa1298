/* tslint:disable */
/* eslint-disable */

/**
 * `h(x, anchor)` for `x` moving along the first axis over `[lo, hi]`; the
 * anchor is `(a, 0, ..., 0)`. The last entry is `-M(anchor)`.
 */
export function kernel_profile(spec: string, anchor: number, lo: number, hi: number, n: number): Float64Array;

/**
 * `[r*, mean g*, mean g*^2, se(r*)]`.
 */
export function r_star(_null: string, data: string, outer: number, inner: number, seed: bigint): Float64Array;

/**
 * Replicated wealth paths. Returns `horizon` rows of
 * `[mean log-wealth, 2.5% quantile, 97.5% quantile, rejection proportion]`.
 */
export function wealth_band(_null: string, data: string, strategy: string, alpha: number, horizon: number, replications: number, seed: bigint): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly kernel_profile: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly r_star: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number, number];
    readonly wealth_band: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
