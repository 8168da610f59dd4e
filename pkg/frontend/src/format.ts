/** Display helpers. Values arrive formatted by the service (money as
 * 2-decimal strings); these only dress them for the screen. */

export function money(value: string): string {
  return `${value} BS`;
}

export function percent(p: number): string {
  return `${(100 * p).toFixed(1)}%`;
}

export function kappaLabel(kappa: number | null, band: string | null): string {
  if (kappa === null) return "n/a";
  return band ? `${kappa.toFixed(2)} (${band})` : kappa.toFixed(2);
}

export function verdictLabel(decision: 0 | 1 | null): string {
  if (decision === null) return "—";
  return decision === 1 ? "give" : "deny";
}
