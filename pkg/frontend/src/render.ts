// Pure view models derived from console state; the DOM layer in main.ts
// only prints these.

import { ConsoleState, FeedEntry, ObjectiveCard } from './state'

export interface TimelineTick {
  chunkId: number
  startMs: number
  endMs: number
  frameCount: number
}

export function timelineTicks(state: ConsoleState): TimelineTick[] {
  return state.feed
    .filter((e) => e.type === 'chunk_meta')
    .map((e) => ({
      chunkId: e.body.chunk_id as number,
      startMs: e.body.start_ms as number,
      endMs: e.body.end_ms as number,
      frameCount: e.body.frame_count as number,
    }))
}

export interface ChatEntry {
  tAbsMs: number
  queryId?: string
  text: string
  kind: string
}

export function chatEntries(state: ConsoleState): ChatEntry[] {
  return state.feed
    .filter((e) => e.type === 'answer' || e.type === 'error')
    .map((e) => ({
      tAbsMs: e.tAbsMs,
      queryId:
        typeof e.body.query_id === 'string' ? (e.body.query_id as string) : e.replyTo,
      text: String(e.body.text ?? e.body.reason ?? ''),
      kind: String(e.body.kind ?? e.type),
    }))
}

export interface Toast {
  tAbsMs: number
  token?: string
  text: string
  kind: string
}

// Proactive fires and skill executions surface as highlighted toasts.
export function toasts(state: ConsoleState): Toast[] {
  return state.feed
    .filter((e) => e.type === 'proactive')
    .map((e) => {
      const payload = (e.body.payload ?? {}) as Record<string, unknown>
      return {
        tAbsMs: e.tAbsMs,
        token: typeof payload.token === 'string' ? (payload.token as string) : undefined,
        text: String(e.body.text ?? ''),
        kind: String(e.body.kind ?? 'proactive'),
      }
    })
}

export function objectiveCards(state: ConsoleState): ObjectiveCard[] {
  return [...state.objectives.values()].sort((a, b) => a.rid - b.rid)
}

// Remaining ms until a time-aware objective fires; null when not applicable.
export function countdownMs(card: ObjectiveCard, nowMs: number): number | null {
  if (card.status !== 'armed' || card.triggerAtMs === undefined) return null
  return Math.max(0, card.triggerAtMs - nowMs)
}

export function feedIsOrdered(feed: FeedEntry[]): boolean {
  for (let i = 1; i < feed.length; i += 1) {
    const a = feed[i - 1]
    const b = feed[i]
    if (a.tAbsMs > b.tAbsMs || (a.tAbsMs === b.tAbsMs && a.seq > b.seq)) return false
  }
  return true
}
