// Pure view-state transitions: everything here is a function of the last
// server responses plus the local draft, so a refresh reproduces the view.
import { FAILURE_MODES } from './types.js';
export function initialState(reviewer) {
    return {
        items: [],
        cursor: null,
        currentId: null,
        draft: { verdict: null, failureMode: null, reviewer },
        hint: null,
        banner: null,
        submitting: false,
    };
}
export function withQueue(state, items, cursor) {
    const currentId = state.currentId && items.some((i) => i.id === state.currentId)
        ? state.currentId
        : (items[0]?.id ?? null);
    return { ...state, items, cursor, currentId, banner: null };
}
/** Next pending sample after the current one, wrapping around. */
export function nextPendingId(state) {
    const pending = state.items.filter((i) => i.status === 'pending');
    if (pending.length === 0)
        return null;
    const after = pending.filter((i) => i.id !== state.currentId);
    if (after.length === 0)
        return null;
    const order = state.items.map((i) => i.id);
    const from = state.currentId ? order.indexOf(state.currentId) : -1;
    const sorted = [...after].sort((a, b) => ((order.indexOf(a.id) - from + order.length) % order.length) -
        ((order.indexOf(b.id) - from + order.length) % order.length));
    return sorted[0].id;
}
/**
 * Draft validation mirroring the server's decision invariants; returns a
 * human hint when the draft must not be posted yet.
 */
export function validateDraft(draft) {
    if (!draft.reviewer.trim()) {
        return 'set your reviewer name first';
    }
    if (!draft.verdict) {
        return 'pick a verdict: a = accept, r = reject, f = flag';
    }
    if (draft.verdict === 'reject' && !draft.failureMode) {
        return 'rejecting needs a failure mode (keys 1-5)';
    }
    if (draft.verdict === 'accept' && draft.failureMode) {
        return 'an accepted sample cannot carry a failure mode';
    }
    return null;
}
/**
 * Keyboard-first verdict flow: a/f submit immediately, r opens the
 * failure-mode picker, 1..5 choose a mode (submitting the reject), Escape
 * cancels, j/k move through the queue.
 */
export function keyToAction(state, key) {
    if (state.submitting)
        return { kind: 'none' };
    const rejecting = state.draft.verdict === 'reject';
    switch (key) {
        case 'a':
            return rejecting
                ? { kind: 'none' }
                : { kind: 'submit', verdict: 'accept', failureMode: null };
        case 'f':
            return rejecting
                ? { kind: 'none' }
                : { kind: 'submit', verdict: 'flag', failureMode: null };
        case 'r':
            return { kind: 'draft-reject' };
        case 'Escape':
            return { kind: 'cancel' };
        case 'j':
            return { kind: 'navigate', direction: 1 };
        case 'k':
            return { kind: 'navigate', direction: -1 };
        default: {
            const index = Number.parseInt(key, 10) - 1;
            if (rejecting && index >= 0 && index < FAILURE_MODES.length) {
                return { kind: 'pick-failure-mode', failureMode: FAILURE_MODES[index] };
            }
            return { kind: 'none' };
        }
    }
}
export function neighborId(state, direction) {
    if (state.items.length === 0)
        return null;
    const index = state.items.findIndex((i) => i.id === state.currentId);
    const next = Math.min(Math.max(index + direction, 0), state.items.length - 1);
    return state.items[next]?.id ?? null;
}
