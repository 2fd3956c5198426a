// View state and the optimistic-update discipline.
//
// The server is the single source of truth: every local mutation is either
// an optimistic hide that remembers how to undo itself, or a reconciliation
// against a record the server returned. Pure functions over ViewState so the
// rules are testable without a DOM.

import type { Candidate, OverlayName, OverlayToggles, QueuePage } from './types.js';

export interface PendingEdit {
  action: string;
  previous: Candidate;
  /** position in the queue before the optimistic removal */
  index: number;
}

export interface ViewState {
  granuleId: string | null;
  overlays: OverlayToggles;
  queue: Candidate[];
  total: number;
  selected: Candidate | null;
  pending: Map<string, PendingEdit>;
  notice: string | null;
}

export function initialState(): ViewState {
  return {
    granuleId: null,
    overlays: {
      rgb: true,
      enhancement: true,
      probability: false,
      candidates: true,
      sites: true,
    },
    queue: [],
    total: 0,
    selected: null,
    pending: new Map(),
    notice: null,
  };
}

/** Replace the queue with a fresh page, preserving the service's order. */
export function loadQueue(state: ViewState, page: QueuePage): ViewState {
  return {
    ...state,
    queue: [...page.items],
    total: page.total,
    selected:
      state.selected && page.items.some((c) => c.id === state.selected!.id)
        ? state.selected
        : null,
    pending: new Map(),
    notice: null,
  };
}

export function selectCandidate(
  state: ViewState,
  candidate: Candidate,
): ViewState {
  return {
    ...state,
    selected: candidate,
    granuleId: candidate.granule_id,
  };
}

/**
 * Hide a candidate from the queue before the service confirms the review.
 * Remembers the original record and position so a failed request can roll
 * back without refetching.
 */
export function applyOptimistic(
  state: ViewState,
  candidateId: string,
  action: string,
): ViewState {
  const index = state.queue.findIndex((c) => c.id === candidateId);
  if (index < 0) return state;
  const previous = state.queue[index]!;
  const pending = new Map(state.pending);
  pending.set(candidateId, { action, previous, index });
  return {
    ...state,
    queue: state.queue.filter((c) => c.id !== candidateId),
    total: Math.max(0, state.total - 1),
    selected: state.selected?.id === candidateId ? null : state.selected,
    pending,
  };
}

/** The service confirmed: adopt its copy of the record, clear the edit. */
export function reconcile(state: ViewState, server: Candidate): ViewState {
  const pending = new Map(state.pending);
  pending.delete(server.id);
  let queue = state.queue;
  let total = state.total;
  if (server.review_state === 'proposed') {
    // server did not actually move it; restore visibility at the front of
    // where it was, falling back to append
    const edit = state.pending.get(server.id);
    const at = edit ? Math.min(edit.index, queue.length) : queue.length;
    queue = [...queue.slice(0, at), server, ...queue.slice(at)];
    total += 1;
  }
  return { ...state, queue, total, pending };
}

/** Network or server failure: undo the optimistic hide. */
export function rollback(state: ViewState, candidateId: string): ViewState {
  const edit = state.pending.get(candidateId);
  if (!edit) return state;
  const pending = new Map(state.pending);
  pending.delete(candidateId);
  const at = Math.min(edit.index, state.queue.length);
  return {
    ...state,
    queue: [...state.queue.slice(0, at), edit.previous, ...state.queue.slice(at)],
    total: state.total + 1,
    pending,
  };
}

/** Conflict (409): someone else reviewed it; reload and tell the analyst. */
export function conflictRefresh(
  state: ViewState,
  page: QueuePage,
  candidateId: string,
): ViewState {
  const refreshed = loadQueue(state, page);
  return {
    ...refreshed,
    notice: `candidate ${candidateId} was already reviewed elsewhere; queue refreshed`,
  };
}

/** Overlay visibility is pure presentation; never touches the queue. */
export function toggleOverlay(state: ViewState, name: OverlayName): ViewState {
  return {
    ...state,
    overlays: { ...state.overlays, [name]: !state.overlays[name] },
  };
}

export function setNotice(state: ViewState, notice: string | null): ViewState {
  return { ...state, notice };
}

export type Listener = (state: ViewState) => void;

/** Minimal observable store; components subscribe and re-render. */
export class Store {
  private state: ViewState = initialState();
  private listeners: Listener[] = [];

  get(): ViewState {
    return this.state;
  }

  set(next: ViewState): void {
    this.state = next;
    for (const listener of this.listeners) listener(next);
  }

  update(fn: (state: ViewState) => ViewState): void {
    this.set(fn(this.state));
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    listener(this.state);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }
}
