// Gateway protocol: parsing/validation of server lines and byte-exact
// encoding of the steering messages. See ../../docs/gateway-protocol.md.

export const SERVER_TYPES = [
  'answer',
  'proactive',
  'signal',
  'chunk_meta',
  'memory_stats',
  'error',
] as const

export type ServerType = (typeof SERVER_TYPES)[number]

export interface ServerMessage {
  seq: number
  type: ServerType
  reply_to?: string
  body: Record<string, unknown>
}

export type ParseResult =
  | { ok: true; msg: ServerMessage }
  | { ok: false; reason: string }

function isObject(x: unknown): x is Record<string, unknown> {
  return typeof x === 'object' && x !== null && !Array.isArray(x)
}

export function parseServerLine(line: string): ParseResult {
  let raw: unknown
  try {
    raw = JSON.parse(line)
  } catch {
    return { ok: false, reason: 'invalid JSON' }
  }
  if (!isObject(raw)) return { ok: false, reason: 'not an object' }
  const { seq, type, reply_to, body } = raw as Record<string, unknown>
  if (typeof seq !== 'number' || !Number.isInteger(seq)) {
    return { ok: false, reason: 'seq must be an integer' }
  }
  if (typeof type !== 'string' || !(SERVER_TYPES as readonly string[]).includes(type)) {
    return { ok: false, reason: `unknown server type ${JSON.stringify(type)}` }
  }
  if (reply_to !== undefined && typeof reply_to !== 'string') {
    return { ok: false, reason: 'reply_to must be a string' }
  }
  if (!isObject(body)) return { ok: false, reason: 'body must be an object' }
  if (typeof body.t_abs_ms !== 'number') {
    return { ok: false, reason: 'body.t_abs_ms missing' }
  }
  const t = type as ServerType
  if (t === 'chunk_meta') {
    for (const field of ['chunk_id', 'start_ms', 'end_ms', 'frame_count']) {
      if (typeof body[field] !== 'number') {
        return { ok: false, reason: `chunk_meta.${field} missing` }
      }
    }
  } else if (t === 'signal') {
    if (typeof body.token !== 'string') return { ok: false, reason: 'signal.token missing' }
  } else if (t === 'memory_stats') {
    const hasStats = typeof body.segments === 'number'
    const hasNodes = Array.isArray(body.nodes)
    if (!hasStats && !hasNodes) {
      return { ok: false, reason: 'memory_stats needs counts or nodes' }
    }
  } else if (t === 'answer' || t === 'proactive') {
    if (typeof body.kind !== 'string' || typeof body.text !== 'string') {
      return { ok: false, reason: `${t} body must carry a transcript event` }
    }
  }
  return {
    ok: true,
    msg: { seq, type: t, reply_to: reply_to as string | undefined, body },
  }
}

// -- steering encoders ------------------------------------------------------
// Key order matters: these must match the documented catalog byte-for-byte.

function enc(id: string, type: string, body: Record<string, unknown>): string {
  return JSON.stringify({ id, type, body })
}

export function encodeQuery(id: string, text: string, tAbsMs: number): string {
  return enc(id, 'query', { text, t_abs_ms: tAbsMs })
}

export function encodeSetObjective(id: string, text: string, tAbsMs: number): string {
  return enc(id, 'set_objective', { text, t_abs_ms: tAbsMs })
}

export function encodeEvolveObjective(
  id: string,
  rid: number,
  text: string,
  tAbsMs: number,
): string {
  return enc(id, 'evolve_objective', { rid, text, t_abs_ms: tAbsMs })
}

export function encodeCancelObjective(id: string, rid: number, tAbsMs: number): string {
  return enc(id, 'cancel_objective', { rid, t_abs_ms: tAbsMs })
}

export function encodePause(id: string, tAbsMs: number): string {
  return enc(id, 'pause', { t_abs_ms: tAbsMs })
}

export function encodeResume(id: string, tAbsMs: number): string {
  return enc(id, 'resume', { t_abs_ms: tAbsMs })
}

export function encodeStatsRequest(id: string, tAbsMs: number): string {
  return enc(id, 'state_request', { scope: 'stats', t_abs_ms: tAbsMs })
}

export function encodeNodesRequest(
  id: string,
  sinceMs: number,
  untilMs: number,
  tAbsMs: number,
): string {
  return enc(id, 'state_request', {
    scope: 'nodes',
    since_ms: sinceMs,
    until_ms: untilMs,
    t_abs_ms: tAbsMs,
  })
}

export function encodeReconnect(id: string, fromSeq: number, tAbsMs: number): string {
  return enc(id, 'state_request', { scope: 'stats', from_seq: fromSeq, t_abs_ms: tAbsMs })
}
