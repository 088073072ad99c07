// Console state: one reducer applies every server message. The feed stays
// ordered by (t_abs_ms, seq); objective cards track the last server-reported
// state per rid; steering acks clear optimistic pending markers.

import { parseServerLine, ServerMessage } from './protocol'
import { buildForest, MemoryNodeRow, TreeNode } from './tree'

export type ConnectionStatus = 'idle' | 'connecting' | 'open' | 'closed' | 'error'

export type ObjectiveStatus = 'armed' | 'fired' | 'cancelled'

export interface ObjectiveCard {
  rid: number
  kind: string
  status: ObjectiveStatus
  triggerAtMs?: number
  labels?: string[]
  lastResponse?: string
  lastToken?: string
  fireCount: number
}

export interface FeedEntry {
  seq: number
  type: ServerMessage['type']
  tAbsMs: number
  replyTo?: string
  body: Record<string, unknown>
}

export interface MemoryStats {
  segments: number
  atomic_actions: number
  events: number
  kv_visual_count: number
}

export interface InlineError {
  id: string
  message: string
}

export interface ConsoleState {
  connection: ConnectionStatus
  banner: string | null
  feed: FeedEntry[]
  objectives: Map<number, ObjectiveCard>
  objectiveErrors: InlineError[]
  pending: Set<string>
  stats: MemoryStats | null
  forest: TreeNode[] | null
  violations: string[]
  lastSeq: number
  lastTAbsMs: number
  composer: string
}

export function initialState(): ConsoleState {
  return {
    connection: 'idle',
    banner: null,
    feed: [],
    objectives: new Map(),
    objectiveErrors: [],
    pending: new Set(),
    stats: null,
    forest: null,
    violations: [],
    lastSeq: -1,
    lastTAbsMs: 0,
    composer: '',
  }
}

function insertOrdered(feed: FeedEntry[], entry: FeedEntry): void {
  // server order is already (t, seq)-monotone except for replayed tails,
  // so scan from the back
  let i = feed.length
  while (
    i > 0 &&
    (feed[i - 1].tAbsMs > entry.tAbsMs ||
      (feed[i - 1].tAbsMs === entry.tAbsMs && feed[i - 1].seq > entry.seq))
  ) {
    i -= 1
  }
  feed.splice(i, 0, entry)
}

function asNumber(x: unknown): number | undefined {
  return typeof x === 'number' ? x : undefined
}

export function applyServerLine(state: ConsoleState, line: string): void {
  const parsed = parseServerLine(line)
  if (!parsed.ok) {
    state.violations.push(parsed.reason)
    return
  }
  applyServerMessage(state, parsed.msg)
}

export function applyServerMessage(state: ConsoleState, msg: ServerMessage): void {
  const t = asNumber(msg.body.t_abs_ms) ?? state.lastTAbsMs
  if (msg.seq >= 0 && msg.seq <= state.lastSeq) {
    return // duplicate from a reconnect replay
  }
  if (msg.seq >= 0) state.lastSeq = msg.seq
  state.lastTAbsMs = Math.max(state.lastTAbsMs, t)
  insertOrdered(state.feed, {
    seq: msg.seq,
    type: msg.type,
    tAbsMs: t,
    replyTo: msg.reply_to,
    body: msg.body,
  })
  if (msg.reply_to !== undefined) state.pending.delete(msg.reply_to)

  const payload = (msg.body.payload ?? {}) as Record<string, unknown>
  switch (msg.type) {
    case 'answer': {
      const rid = asNumber(payload.rid)
      if (rid !== undefined && typeof payload.kind === 'string') {
        state.objectives.set(rid, {
          rid,
          kind: payload.kind,
          status: 'armed',
          triggerAtMs: asNumber(payload.trigger_at_ms),
          labels: Array.isArray(payload.labels) ? (payload.labels as string[]) : undefined,
          fireCount: state.objectives.get(rid)?.fireCount ?? 0,
        })
      } else if (rid !== undefined && typeof payload.state === 'string') {
        const card = state.objectives.get(rid)
        if (card) {
          card.status = payload.state === 'cancelled' ? 'cancelled' : 'armed'
        }
      } else if (payload.error === 'unparseable_objective' && msg.reply_to) {
        state.objectiveErrors.push({
          id: msg.reply_to,
          message: String(msg.body.text ?? ''),
        })
      }
      break
    }
    case 'proactive': {
      if (msg.body.kind === 'proactive') {
        const rid = asNumber(payload.rid)
        if (rid !== undefined) {
          const card = state.objectives.get(rid) ?? {
            rid,
            kind: 'unknown',
            status: 'armed' as ObjectiveStatus,
            fireCount: 0,
          }
          card.status = 'fired'
          card.fireCount += 1
          card.lastResponse = String(msg.body.text ?? '')
          card.lastToken = typeof payload.token === 'string' ? payload.token : undefined
          state.objectives.set(rid, card)
        }
      }
      break
    }
    case 'memory_stats': {
      if (Array.isArray(msg.body.nodes)) {
        state.forest = buildForest(msg.body.nodes as unknown as MemoryNodeRow[])
      } else {
        state.stats = {
          segments: asNumber(msg.body.segments) ?? 0,
          atomic_actions: asNumber(msg.body.atomic_actions) ?? 0,
          events: asNumber(msg.body.events) ?? 0,
          kv_visual_count: asNumber(msg.body.kv_visual_count) ?? 0,
        }
      }
      break
    }
    case 'error': {
      if (msg.reply_to) {
        state.objectiveErrors.push({
          id: msg.reply_to,
          message: String(msg.body.reason ?? msg.body.text ?? 'error'),
        })
      }
      break
    }
    case 'signal':
    case 'chunk_meta':
      break
  }
}

export function markPending(state: ConsoleState, id: string): void {
  state.pending.add(id)
}
