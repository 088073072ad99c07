// One line-oriented connection with reconnect-from-sequence-number.
//
// The gateway speaks newline-delimited JSON over TCP; in a browser this is
// reached through a WebSocket-to-TCP bridge (each WS text message is one
// line). The transport is injectable so tests drive everything with a fake.

import {
  encodeCancelObjective,
  encodeEvolveObjective,
  encodeQuery,
  encodeReconnect,
  encodeSetObjective,
  encodeStatsRequest,
  encodeNodesRequest,
} from './protocol'
import { applyServerLine, ConsoleState, markPending } from './state'

export interface Transport {
  send(line: string): void
  close(): void
}

export interface TransportHandlers {
  onOpen(): void
  onLine(line: string): void
  onClose(): void
  onError(message: string): void
}

export type TransportFactory = (address: string, handlers: TransportHandlers) => Transport

export type Scheduler = (fn: () => void, delayMs: number) => void

export class ConsoleConnection {
  private transport: Transport | null = null
  private counter = 0
  private everConnected = false
  private retryArmed = false

  constructor(
    private readonly address: string,
    private readonly state: ConsoleState,
    private readonly factory: TransportFactory,
    private readonly schedule: Scheduler = (fn, ms) => setTimeout(fn, ms),
    private readonly retryMs: number = 2000,
  ) {}

  nextId(prefix: string): string {
    this.counter += 1
    return `${prefix}-${this.counter}`
  }

  connect(): void {
    this.state.connection = 'connecting'
    this.retryArmed = false
    this.transport = this.factory(this.address, {
      onOpen: () => {
        this.state.connection = 'open'
        this.state.banner = null
        if (this.everConnected && this.state.lastSeq >= 0) {
          // replay everything we missed while disconnected
          this.raw(encodeReconnect(this.nextId('s'), this.state.lastSeq + 1, this.state.lastTAbsMs))
        }
        this.everConnected = true
      },
      onLine: (line) => applyServerLine(this.state, line),
      onClose: () => {
        this.state.connection = 'closed'
        this.state.banner = `connection lost; retrying in ${this.retryMs / 1000}s`
        this.retry()
      },
      onError: (message) => {
        this.state.connection = 'error'
        this.state.banner = `connection failed (${message}); retrying in ${this.retryMs / 1000}s`
        this.retry()
      },
    })
  }

  // a WebSocket failure reports onError and then onClose; retry only once
  private retry(): void {
    if (this.retryArmed) return
    this.retryArmed = true
    this.schedule(() => this.connect(), this.retryMs)
  }

  private raw(line: string): void {
    if (!this.transport) throw new Error('not connected')
    this.transport.send(line)
  }

  private steer(id: string, line: string): string {
    markPending(this.state, id)
    this.raw(line)
    return id
  }

  sendQuery(text: string): string {
    const id = this.nextId('q')
    return this.steer(id, encodeQuery(id, text, this.state.lastTAbsMs))
  }

  setObjective(text: string): string {
    const id = this.nextId('o')
    return this.steer(id, encodeSetObjective(id, text, this.state.lastTAbsMs))
  }

  evolveObjective(rid: number, text: string): string {
    const id = this.nextId('o')
    return this.steer(id, encodeEvolveObjective(id, rid, text, this.state.lastTAbsMs))
  }

  cancelObjective(rid: number): string {
    const id = this.nextId('o')
    return this.steer(id, encodeCancelObjective(id, rid, this.state.lastTAbsMs))
  }

  requestStats(): string {
    const id = this.nextId('s')
    return this.steer(id, encodeStatsRequest(id, this.state.lastTAbsMs))
  }

  requestNodes(sinceMs: number, untilMs: number): string {
    const id = this.nextId('s')
    return this.steer(id, encodeNodesRequest(id, sinceMs, untilMs, this.state.lastTAbsMs))
  }
}

// Browser transport: one WebSocket message per protocol line.
export function webSocketTransport(address: string, handlers: TransportHandlers): Transport {
  const ws = new WebSocket(address)
  ws.onopen = () => handlers.onOpen()
  ws.onmessage = (ev) => {
    for (const line of String(ev.data).split('\n')) {
      if (line.trim()) handlers.onLine(line)
    }
  }
  ws.onclose = () => handlers.onClose()
  ws.onerror = () => handlers.onError('websocket error')
  return {
    send: (line) => ws.send(line),
    close: () => ws.close(),
  }
}
