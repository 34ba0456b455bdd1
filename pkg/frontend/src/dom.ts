/** Tiny DOM helpers shared by the views. */

import { ApiError } from "./api.js";

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

export function clear(container: Element): void {
  while (container.firstChild) {
    container.removeChild(container.firstChild);
  }
}

export function energyCard(testId: string, title: string, wh: number): HTMLElement {
  const value = el("div", { class: "card-value", "data-testid": testId });
  value.dataset.value = String(wh);
  value.textContent = formatWh(wh);
  return el("div", { class: "card" }, [el("div", { class: "card-title" }, [title]), value]);
}

export function formatWh(wh: number): string {
  if (wh >= 10_000) return `${(wh / 1000).toFixed(2)} kWh`;
  return `${wh.toFixed(1)} Wh`;
}

/** Inline error with a retry hook; 422 renders as a validation hint. */
export function errorView(error: unknown, retry?: () => void): HTMLElement {
  const box = el("div", { class: "error-box", "data-testid": "error" });
  if (error instanceof ApiError && error.status === 422) {
    box.classList.add("validation-hint");
    box.append(el("p", {}, [`Check the filters: ${error.message}`]));
  } else {
    box.append(el("p", {}, [`Something went wrong: ${String((error as Error)?.message ?? error)}`]));
  }
  if (retry) {
    const button = el("button", { class: "retry", type: "button" }, ["Retry"]);
    button.addEventListener("click", retry);
    box.append(button);
  }
  return box;
}

export function emptyState(message: string): HTMLElement {
  return el("div", { class: "empty-state", "data-testid": "empty" }, [message]);
}
