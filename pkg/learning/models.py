from django.db import models


class TrainingRun(models.Model):
    MODE_CHOICES = [
        ('ours', 'Визуальная политика, пул тканей'),
        ('ours-minus', 'Визуальная политика, одна ткань'),
        ('fixed', 'Политика по состоянию, одна ткань'),
    ]
    STATUS_CHOICES = [
        ('running', 'Выполняется'),
        ('interrupted', 'Прерван'),
        ('finished', 'Завершен'),
        ('failed', 'Ошибка'),
    ]

    name = models.CharField(max_length=200)
    mode = models.CharField(max_length=12, choices=MODE_CHOICES)
    seed = models.IntegerField()
    output_dir = models.CharField(max_length=500)
    status = models.CharField(max_length=12, choices=STATUS_CHOICES, default='running')
    epochs_done = models.PositiveIntegerField(default=0)
    checkpoint_path = models.CharField(max_length=500, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        unique_together = ['output_dir', 'mode', 'seed']
        indexes = [
            models.Index(fields=['status', 'updated_at'], name='learning_tr_status_7c1e2a_idx'),
        ]

    def __str__(self):
        return f"{self.name} ({self.mode}, seed {self.seed}): {self.status}"


class EpochMetric(models.Model):
    run = models.ForeignKey(
        TrainingRun,
        on_delete=models.CASCADE,
        related_name='metrics'
    )
    epoch = models.PositiveIntegerField()
    success_rate = models.FloatField()
    mean_d_sum = models.FloatField()
    critic1_loss = models.FloatField(null=True)
    critic2_loss = models.FloatField(null=True)
    actor_loss = models.FloatField(null=True)
    alpha = models.FloatField(null=True)
    aux_loss = models.FloatField(null=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        unique_together = ['run', 'epoch']
        ordering = ['epoch']

    def __str__(self):
        return f"{self.run.name} epoch {self.epoch}: {self.success_rate:.2f}"
