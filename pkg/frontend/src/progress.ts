// View model for the progress-bar tree: tracks expansion state and the
// per-concept delta since the previous API values, so a fresh answer can
// highlight exactly which bars moved.

import type { ProgressNode } from "./types.js";

export interface BarView {
  concept: string;
  title: string;
  percent: number;
  delta: number; // new minus old API value; 0 on first load
  depth: number;
  hasChildren: boolean;
  expanded: boolean;
  visible: boolean;
}

export function flattenPercents(tree: ProgressNode): Map<string, number> {
  const out = new Map<string, number>();
  const walk = (node: ProgressNode) => {
    out.set(node.concept, node.percent);
    node.children.forEach(walk);
  };
  walk(tree);
  return out;
}

export class ProgressTreeViewModel {
  private tree: ProgressNode | null = null;
  private previous = new Map<string, number>();
  private expandedSet = new Set<string>();

  /** Replace the tree with fresh API values; deltas become new - old. */
  update(tree: ProgressNode): void {
    this.previous = this.tree ? flattenPercents(this.tree) : new Map();
    if (this.tree === null) {
      // first load: root and chapters start expanded
      this.expandedSet.add(tree.concept);
      tree.children.forEach((child) => this.expandedSet.add(child.concept));
    }
    this.tree = tree;
  }

  toggle(concept: string): void {
    if (this.expandedSet.has(concept)) {
      this.expandedSet.delete(concept);
    } else {
      this.expandedSet.add(concept);
    }
  }

  percentOf(concept: string): number | undefined {
    if (this.tree === null) return undefined;
    return flattenPercents(this.tree).get(concept);
  }

  deltaOf(concept: string): number {
    const now = this.percentOf(concept);
    if (now === undefined) return 0;
    const before = this.previous.get(concept);
    return before === undefined ? 0 : now - before;
  }

  /** Depth-first bar list; children of collapsed nodes are not visible. */
  bars(): BarView[] {
    const out: BarView[] = [];
    if (this.tree === null) return out;
    const walk = (node: ProgressNode, depth: number, visible: boolean) => {
      const expanded = this.expandedSet.has(node.concept);
      out.push({
        concept: node.concept,
        title: node.title,
        percent: node.percent,
        delta: this.deltaOf(node.concept),
        depth,
        hasChildren: node.children.length > 0,
        expanded,
        visible,
      });
      node.children.forEach((child) => walk(child, depth + 1, visible && expanded));
    };
    walk(this.tree, 0, true);
    return out;
  }
}
