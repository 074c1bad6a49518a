/** Set difference between two top-k lists for the what-if view. */

export interface TopKDiff {
  entered: string[]; // in the new list only, new-list order
  dropped: string[]; // in the old list only, old-list order
  stayed: string[]; // in both, new-list order
}

export function diffTopK(before: string[], after: string[]): TopKDiff {
  const beforeSet = new Set(before);
  const afterSet = new Set(after);
  return {
    entered: after.filter((d) => !beforeSet.has(d)),
    dropped: before.filter((d) => !afterSet.has(d)),
    stayed: after.filter((d) => beforeSet.has(d)),
  };
}
