// Canonical stringify: object keys sorted recursively, so identical
// dashboard states always produce byte-identical request bodies (which is
// what lets the server serve repeats from its result cache).

export function canonicalStringify(value: unknown): string {
  if (value === null || typeof value !== "object") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalStringify).join(",") + "]";
  }
  const entries = Object.entries(value as Record<string, unknown>)
    .filter(([, v]) => v !== undefined)
    .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
    .map(([k, v]) => JSON.stringify(k) + ":" + canonicalStringify(v));
  return "{" + entries.join(",") + "}";
}
