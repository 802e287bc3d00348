/* tslint:disable */
/* eslint-disable */

/**
 * Simulates `r_n = eta r_{n-1}^2 + lambda q_l^{n-1} r_{n-1} + rho q_r^{n-1}`
 * and tries every certificate on it.
 */
export function majorant_explorer(eta: number, lambda: number, q_lambda: number, rho: number, q_rho: number, r0: number, horizon: number): string;

/**
 * Iterates `x = f(x)` with the given scheme and returns the step sizes
 * next to the simulated majorant built from `M`, `K` and `eps`.
 */
export function trace_vs_majorant(expr: string, scheme: string, x0: number, m: number, k: number, eps: number, steps: number): string;

/**
 * Picard iteration for `x(t) = int_0^t (x(s) + 1) ds` on `[0, t_end]`.
 */
export function volterra_picard(m: number, t_end: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly majorant_explorer: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number];
    readonly trace_vs_majorant: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number];
    readonly volterra_picard: (a: number, b: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
