// DOM bootstrap: wires the connection/state/render modules to the page.
// All behavior worth testing lives in those modules; this file only paints.

import { ConsoleConnection, webSocketTransport } from './connection'
import { chatEntries, countdownMs, objectiveCards, timelineTicks, toasts } from './render'
import { initialState } from './state'
import { forestLines } from './tree'

const state = initialState()
const collapsed = new Set<number>()

const params = new URLSearchParams(location.search)
const address = params.get('gateway') ?? `ws://${location.host}/gateway`
const connection = new ConsoleConnection(address, state, webSocketTransport)

function el(id: string): HTMLElement {
  const node = document.getElementById(id)
  if (!node) throw new Error(`missing #${id}`)
  return node
}

function paint(): void {
  el('banner').textContent = state.banner ?? ''
  el('banner').style.display = state.banner ? 'block' : 'none'
  el('status').textContent = state.connection

  el('timeline').textContent = timelineTicks(state)
    .map((t) => `#${t.chunkId} [${t.startMs}-${t.endMs}] ${t.frameCount}f`)
    .join('  ')

  el('chat').innerHTML = chatEntries(state)
    .map((c) => `<div class="msg ${c.kind}"><b>${c.tAbsMs}</b> ${escapeHtml(c.text)}</div>`)
    .join('')

  el('toasts').innerHTML = toasts(state)
    .slice(-6)
    .map(
      (t) =>
        `<div class="toast ${t.kind}">${t.token ? `<code>${escapeHtml(t.token)}</code> ` : ''}${escapeHtml(t.text)}</div>`,
    )
    .join('')

  el('objectives').innerHTML = objectiveCards(state)
    .map((card) => {
      const left = countdownMs(card, state.lastTAbsMs)
      const extra =
        left !== null ? ` fires in ${(left / 1000).toFixed(1)}s` : card.lastResponse ?? ''
      return `<div class="card ${card.status}">#${card.rid} ${card.kind} [${card.status}]${escapeHtml(
        extra ? ` ${extra}` : '',
      )}</div>`
    })
    .join('')
  el('objective-errors').innerHTML = state.objectiveErrors
    .map((e) => `<div class="inline-error">${e.id}: ${escapeHtml(e.message)}</div>`)
    .join('')

  el('stats').textContent = state.stats
    ? `segments ${state.stats.segments} | actions ${state.stats.atomic_actions} | events ${state.stats.events} | kv ${state.stats.kv_visual_count}`
    : ''
  el('memory-tree').innerHTML = (state.forest ? forestLines(state.forest, collapsed) : [])
    .map(
      (line) =>
        `<div class="tree-row" data-node="${line.nodeId}" style="padding-left:${line.depth}em">` +
        `${line.collapsible ? (line.collapsed ? '▸' : '▾') : '·'} ${escapeHtml(line.label)} ` +
        `<span class="span">[${line.span[0]}-${line.span[1]}]</span></div>`,
    )
    .join('')
}

function escapeHtml(s: string): string {
  return s.replace(/[&<>"]/g, (c) => ({ '&': '&amp;', '<': '&lt;', '>': '&gt;', '"': '&quot;' })[c]!)
}

el('send').addEventListener('click', () => {
  const input = el('composer') as HTMLInputElement
  if (input.value.trim()) connection.sendQuery(input.value.trim())
  input.value = ''
})
el('set-objective').addEventListener('click', () => {
  const input = el('composer') as HTMLInputElement
  if (input.value.trim()) connection.setObjective(input.value.trim())
  input.value = ''
})
el('refresh-memory').addEventListener('click', () => {
  connection.requestStats()
  connection.requestNodes(0, Number.MAX_SAFE_INTEGER)
})
el('memory-tree').addEventListener('click', (ev) => {
  const row = (ev.target as HTMLElement).closest('.tree-row') as HTMLElement | null
  if (!row) return
  const id = Number(row.dataset.node)
  if (collapsed.has(id)) collapsed.delete(id)
  else collapsed.add(id)
  paint()
})

connection.connect()
setInterval(paint, 100)
