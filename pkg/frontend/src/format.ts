// Fixed 6-decimal display, matching the server's table formatting.

export function fmt6(value: number): string {
  return value.toFixed(6);
}

export function escapeHtml(value: string): string {
  return value
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}
