import { initApp } from './app.js';
const root = document.getElementById('app');
if (root) {
    void initApp(root).start();
}
