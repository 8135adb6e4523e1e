export interface Debounced<A extends unknown[]> {
    (...args: A): void;
    cancel(): void;
}

/** Trailing-edge debounce: the wrapped function runs once, `ms` after
 *  the last call, with the last call's arguments. */
export function debounce<A extends unknown[]>(
    fn: (...args: A) => void, ms = 150): Debounced<A> {
    let timer: ReturnType<typeof setTimeout> | undefined;
    const wrapped = (...args: A) => {
        if (timer !== undefined) clearTimeout(timer);
        timer = setTimeout(() => {
            timer = undefined;
            fn(...args);
        }, ms);
    };
    wrapped.cancel = () => {
        if (timer !== undefined) clearTimeout(timer);
        timer = undefined;
    };
    return wrapped;
}
