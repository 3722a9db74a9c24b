/* tslint:disable */
/* eslint-disable */

export class Episode {
    free(): void;
    [Symbol.dispose](): void;
    frame(): string;
    isFinished(): boolean;
    constructor(task: string, samples: number, seed: bigint);
    /**
     * Plans and executes one cycle; returns the JSON [`Frame`] after it.
     */
    step(): string;
}

/**
 * Row-major barrier cost grid, see [`barrier_grid`].
 */
export function barrierGrid(gamma: number, n: number, lo: number, hi: number): Float64Array;

/**
 * JSON [`ProjectionView`] of a single-joint raw sequence.
 */
export function projectSequence(raw: Float64Array, dt: number, v_max: number, a_max: number, j_max: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_episode_free: (a: number, b: number) => void;
    readonly barrierGrid: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly episode_frame: (a: number) => [number, number];
    readonly episode_isFinished: (a: number) => number;
    readonly episode_new: (a: number, b: number, c: number, d: bigint) => [number, number, number];
    readonly episode_step: (a: number) => [number, number, number, number];
    readonly projectSequence: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
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
