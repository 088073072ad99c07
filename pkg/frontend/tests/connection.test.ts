import { describe, expect, it } from 'vitest'

import { ConsoleConnection, Transport, TransportHandlers } from '../src/connection'
import { initialState } from '../src/state'

class FakeTransport implements Transport {
  sent: string[] = []
  closed = false

  constructor(public handlers: TransportHandlers) {}

  send(line: string): void {
    this.sent.push(line)
  }

  close(): void {
    this.closed = true
  }
}

function harness(opts: { failFirst?: boolean } = {}) {
  const state = initialState()
  const transports: FakeTransport[] = []
  const scheduled: Array<() => void> = []
  let failures = opts.failFirst ? 1 : 0
  const connection = new ConsoleConnection(
    'ws://gateway.test',
    state,
    (_address, handlers) => {
      const t = new FakeTransport(handlers)
      transports.push(t)
      queueMicrotask(() => {
        if (failures > 0) {
          failures -= 1
          handlers.onError('refused')
        } else {
          handlers.onOpen()
        }
      })
      return t
    },
    (fn) => scheduled.push(fn),
    2000,
  )
  return { state, transports, scheduled, connection }
}

const flush = () => new Promise<void>((resolve) => setTimeout(resolve, 0))

describe('ConsoleConnection', () => {
  it('shows a banner and schedules a retry when the gateway is down', async () => {
    const { state, scheduled, connection } = harness({ failFirst: true })
    connection.connect()
    await flush()
    expect(state.connection).toBe('error')
    expect(state.banner).toContain('retrying')
    expect(scheduled.length).toBe(1)
    scheduled[0]() // retry succeeds
    await flush()
    expect(state.connection).toBe('open')
    expect(state.banner).toBeNull()
  })

  it('marks steering pending and sends encoded lines', async () => {
    const { state, transports, connection } = harness()
    connection.connect()
    await flush()
    const id = connection.sendQuery('What color is the car?')
    expect(state.pending.has(id)).toBe(true)
    expect(transports[0].sent).toEqual([
      `{"id":"${id}","type":"query","body":{"text":"What color is the car?","t_abs_ms":0}}`,
    ])
  })

  it('replays from the last sequence number after a drop', async () => {
    const { state, transports, scheduled, connection } = harness()
    connection.connect()
    await flush()
    transports[0].handlers.onLine(
      '{"seq":41,"type":"signal","body":{"t_abs_ms":12000,"token":"<SILENT>"}}',
    )
    expect(state.lastSeq).toBe(41)
    transports[0].handlers.onClose()
    expect(state.connection).toBe('closed')
    scheduled.at(-1)!()
    await flush()
    expect(transports.length).toBe(2)
    expect(transports[1].sent[0]).toBe(
      '{"id":"s-1","type":"state_request","body":{"scope":"stats","from_seq":42,"t_abs_ms":12000}}',
    )
  })

  it('steering is the only writable surface', () => {
    const { connection } = harness()
    const surface = Object.getOwnPropertyNames(Object.getPrototypeOf(connection)).filter(
      (name) =>
        name !== 'constructor' &&
        typeof (connection as unknown as Record<string, unknown>)[name] === 'function',
    )
    expect(surface.sort()).toEqual(
      [
        'cancelObjective',
        'connect',
        'evolveObjective',
        'nextId',
        'raw',
        'requestNodes',
        'requestStats',
        'retry',
        'sendQuery',
        'setObjective',
        'steer',
      ].sort(),
    )
  })

  it('schedules a single retry when error and close both fire', async () => {
    const { transports, scheduled, connection } = harness()
    connection.connect()
    await flush()
    transports[0].handlers.onError('reset')
    transports[0].handlers.onClose()
    expect(scheduled.length).toBe(1)
  })
})
