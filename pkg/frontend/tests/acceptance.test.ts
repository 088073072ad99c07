// Console acceptance: the recorded gateway fixture drives the full feed,
// the objective lifecycle, and the three-level memory tree with no protocol
// violations, and the steering encoders match the documented catalog.

import { describe, expect, it } from 'vitest'

import { chatEntries, feedIsOrdered, objectiveCards, timelineTicks, toasts } from '../src/render'
import { applyServerLine, initialState, markPending } from '../src/state'
import { forestLines } from '../src/tree'
import { feedLines, steeringLines } from './fixtures'

describe('criterion 12: console fixture replay', () => {
  it('replays the recorded session end to end', () => {
    const state = initialState()
    for (const line of steeringLines()) {
      markPending(state, (JSON.parse(line) as { id: string }).id)
    }
    for (const line of feedLines()) applyServerLine(state, line)

    // no protocol violations anywhere in the recorded feed
    expect(state.violations).toEqual([])
    expect(state.feed.length).toBe(feedLines().length)
    expect(feedIsOrdered(state.feed)).toBe(true)

    // the timeline, chat pane, and toasts all have content
    const ticks = timelineTicks(state)
    expect(ticks.length).toBeGreaterThan(20)
    expect(ticks.every((t, i) => i === 0 || ticks[i - 1].endMs === t.startMs)).toBe(true)
    expect(chatEntries(state).some((c) => c.text === 'room_tidy')).toBe(true)
    const allToasts = toasts(state)
    expect(allToasts.some((t) => t.token === '<TRIG:time_due>')).toBe(true)
    expect(
      allToasts.some(
        (t) => t.kind === 'skill_exec' && t.text.startsWith('Dialing 123456789'),
      ),
    ).toBe(true)

    // objective lifecycle: created, fired, evolved (re-armed+re-fired), cancelled
    const cards = objectiveCards(state)
    const timeCard = cards.find((c) => c.rid === 1)!
    expect(timeCard.kind).toBe('time_aware')
    expect(timeCard.fireCount).toBe(2)
    expect(timeCard.status).toBe('cancelled')
    expect(state.objectiveErrors.map((e) => e.id)).toEqual(['o-2'])

    // three-level memory tree rendered from the nodes payload
    const lines = forestLines(state.forest!, new Set())
    const levels = new Set(lines.map((l) => l.level))
    expect(levels).toEqual(new Set(['event', 'atomic_action', 'segment']))
    for (const line of lines) {
      expect(line.span[0]).toBeLessThanOrEqual(line.span[1])
    }

    // every steering message was acknowledged
    expect(state.pending.size).toBe(0)
  })
})
