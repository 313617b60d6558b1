// Transient error toasts, stacked bottom-right.

const TOAST_MS = 4000;

export function showToast(doc: Document, message: string): void {
  let stack = doc.querySelector(".toast-stack");
  if (!stack) {
    stack = doc.createElement("div");
    stack.className = "toast-stack";
    doc.body.appendChild(stack);
  }
  const toast = doc.createElement("div");
  toast.className = "toast";
  toast.setAttribute("role", "alert");
  toast.textContent = message;
  stack.appendChild(toast);
  setTimeout(() => toast.remove(), TOAST_MS);
}
