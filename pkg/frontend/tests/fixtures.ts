import { readFileSync } from 'node:fs'

function lines(name: string): string[] {
  const raw = readFileSync(new URL(`./fixtures/${name}`, import.meta.url), 'utf-8')
  return raw.split('\n').filter((l) => l.trim().length > 0)
}

export const feedLines = (): string[] => lines('feed.jsonl')
export const steeringLines = (): string[] => lines('steering.jsonl')
