// Three-level memory forest built from the flat node rows the gateway
// returns for state_request scope=nodes.

export type NodeLevel = 'segment' | 'atomic_action' | 'event'

export interface MemoryNodeRow {
  node_id: number
  level: NodeLevel
  start_ms: number
  tau: number
  s: string
  salience: number
  children: number[]
}

export interface TreeNode {
  row: MemoryNodeRow
  children: TreeNode[]
}

export function buildForest(rows: MemoryNodeRow[]): TreeNode[] {
  const byId = new Map<number, MemoryNodeRow>()
  for (const row of rows) byId.set(row.node_id, row)

  function assemble(id: number): TreeNode | null {
    const row = byId.get(id)
    if (!row) return null
    const children = row.children
      .map(assemble)
      .filter((n): n is TreeNode => n !== null)
    return { row, children }
  }

  return rows
    .filter((r) => r.level === 'event')
    .sort((a, b) => a.tau - b.tau || a.node_id - b.node_id)
    .map((r) => assemble(r.node_id))
    .filter((n): n is TreeNode => n !== null)
}

export interface ForestLine {
  nodeId: number
  level: NodeLevel
  depth: number
  label: string
  span: [number, number]
  collapsible: boolean
  collapsed: boolean
}

// Flatten for rendering; children of a collapsed node are omitted.
export function forestLines(forest: TreeNode[], collapsed: Set<number>): ForestLine[] {
  const out: ForestLine[] = []

  function walk(node: TreeNode, depth: number): void {
    const isCollapsed = collapsed.has(node.row.node_id)
    out.push({
      nodeId: node.row.node_id,
      level: node.row.level,
      depth,
      label: `${node.row.level}#${node.row.node_id} ${node.row.s}`,
      span: [node.row.start_ms, node.row.tau],
      collapsible: node.children.length > 0,
      collapsed: isCollapsed,
    })
    if (!isCollapsed) {
      for (const child of node.children) walk(child, depth + 1)
    }
  }

  for (const root of forest) walk(root, 0)
  return out
}
